"""Shared test fixtures: reference designs and random stable coefficient draws."""

import numpy as np

from sparsevar.model import VarCoefficients, stability_check


def stable_random_coefs(rng, q, p, scale=0.5, radius=0.85):
    raw = scale * rng.standard_normal((p, q, q))
    while stability_check(VarCoefficients(raw)) >= radius:
        raw *= 0.8
    return VarCoefficients(raw)


def leader_blocks():
    # two independent blocks of five series; within each block the first
    # series drives the rest, own lags 0.4 / 0.2
    q = 10
    b1 = np.zeros((q, q))
    b2 = np.zeros((q, q))
    for start in (0, 5):
        for i in range(5):
            b1[start + i, start + i] = 0.4
            b2[start + i, start + i] = 0.2
        for i in range(1, 5):
            b1[start + i, start] = 0.4
            b2[start + i, start] = 0.2
    return VarCoefficients([b1, b2])
