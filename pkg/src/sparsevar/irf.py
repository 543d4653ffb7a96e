"""Generalized impulse responses and residual parametric bootstrap bands.

The moving-average representation Phi_0 = I, Phi_k = sum_i B_i Phi_{k-i}
turns fitted coefficients into responses. The generalized form scales each
shock by the error covariance, response of series i at horizon k to a unit
shock in series j being (Phi_k Sigma e_j) / sqrt(Sigma_jj), so no series
ordering is imposed and permuting the system permutes the responses.

Confidence bands come from a parametric residual bootstrap: simulate from the
fitted model, re-estimate with the originally selected tuning, recompute the
responses, and take pointwise percentiles across replicates.
"""

from __future__ import annotations

import csv
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial

import numpy as np
import scipy.linalg

from .estimator import FitConfig, FitResult, alternate_fit
from .exceptions import NumericalError
from .methods import fit_method
from .model import (
    ErrorModel,
    TimeSeriesPanel,
    VarCoefficients,
    center,
    simulate_var,
    stability_check,
)

__all__ = [
    "GirfResult",
    "BootstrapBands",
    "ma_coefficients",
    "girf",
    "effect_size",
    "bootstrap_bands",
    "girf_to_csv",
    "worker_count",
]

_WORKERS_ENV = "SPARSEVAR_WORKERS"


def worker_count() -> int:
    """Process count for embarrassingly parallel loops, from SPARSEVAR_WORKERS.

    Defaults to 1 (serial). Results do not depend on the worker count; every
    replicate owns an RNG stream derived from (seed, replicate index).
    """
    raw = os.environ.get(_WORKERS_ENV, "1")
    try:
        val = int(raw)
    except ValueError as exc:
        raise ValueError(f"{_WORKERS_ENV} must be an integer, got {raw!r}") from exc
    if val < 1:
        raise ValueError(f"{_WORKERS_ENV} must be at least 1, got {val}")
    return val


def ma_coefficients(coefficients: VarCoefficients, horizon: int) -> np.ndarray:
    """Moving-average matrices Phi_0..Phi_horizon as an (horizon+1, q, q) stack."""
    if horizon < 0:
        raise ValueError(f"horizon must be nonnegative, got {horizon}")
    p, q = coefficients.p, coefficients.q
    phi = np.zeros((horizon + 1, q, q))
    phi[0] = np.eye(q)
    for k in range(1, horizon + 1):
        acc = np.zeros((q, q))
        for i in range(1, min(k, p) + 1):
            acc += coefficients.b[i - 1] @ phi[k - i]
        phi[k] = acc
    return phi


@dataclass(frozen=True)
class GirfResult:
    """Generalized impulse responses for all impulse/response pairs.

    ``responses[j, i, k]`` is the response of series i at horizon k to a one
    standard deviation generalized shock in series j.
    """

    responses: np.ndarray
    names: tuple[str, ...]

    @property
    def q(self) -> int:
        return self.responses.shape[0]

    @property
    def horizon(self) -> int:
        return self.responses.shape[2] - 1

    def path(self, impulse: int, response: int) -> np.ndarray:
        """Response path of one pair across horizons 0..horizon."""
        return self.responses[impulse, response, :]


def girf(fit: FitResult, horizon: int = 10, names=None) -> GirfResult:
    """Generalized impulse responses of a fitted model.

    Requires a positive definite error covariance; the sparse estimator's
    precision-based covariance always qualifies.
    """
    if horizon < 0:
        raise ValueError(f"horizon must be nonnegative, got {horizon}")
    sigma = fit.error.sigma
    eigmin = float(scipy.linalg.eigvalsh(sigma)[0])
    if eigmin <= 0.0:
        raise NumericalError(
            "error covariance is not positive definite "
            f"(min eigenvalue {eigmin:.3e}); use an estimator with a proper "
            "precision estimate, such as the sparse fit"
        )
    q = fit.q
    if names is None:
        names = tuple(f"y{i + 1}" for i in range(q))
    else:
        names = tuple(names)
        if len(names) != q:
            raise ValueError(f"expected {q} names, got {len(names)}")
    phi = ma_coefficients(fit.coefficients, horizon)
    scale = 1.0 / np.sqrt(np.diag(sigma))
    responses = np.empty((q, q, horizon + 1))
    for k in range(horizon + 1):
        # column j of Phi_k Sigma is the response vector to a shock in j
        responses[:, :, k] = (phi[k] @ sigma).T * scale[:, None]
    responses.flags.writeable = False
    return GirfResult(responses, names)


def effect_size(
    result: GirfResult, impulse: int, response: int, include_impact: bool = False
) -> float:
    """Total absolute response over lags 1..10 (optionally adding lag 0).

    The window is fixed at the first ten lags, so the result must have been
    computed to horizon 10 or further.
    """
    if result.horizon < 10:
        raise ValueError(
            f"effect size aggregates lags 1..10 but the result stops at horizon "
            f"{result.horizon}"
        )
    path = result.path(impulse, response)
    start = 0 if include_impact else 1
    return float(np.sum(np.abs(path[start:11])))


@dataclass(frozen=True)
class BootstrapBands:
    """Pointwise percentile bands around a GIRF, plus replicate diagnostics."""

    point: GirfResult
    lower: np.ndarray
    upper: np.ndarray
    level: float
    n_boot: int
    n_dropped: int
    coef_covariance: np.ndarray | None


def _default_refit(fit: FitResult):
    """Re-estimation rule used on each bootstrap replicate: the same method
    with the originally selected tuning (penalties frozen for the sparse fit)."""
    if fit.method == "sparse":
        if fit.lam1 is None or fit.lam2 is None:
            raise ValueError("sparse fit is missing its selected penalties")
        return partial(_sparse_refit, p=fit.p, lam1=fit.lam1, lam2=fit.lam2)
    return partial(_method_refit, method=fit.method, p=fit.p)


def _sparse_refit(panel: TimeSeriesPanel, p: int, lam1: float, lam2: float) -> FitResult:
    return alternate_fit(center(panel), p, lam1, lam2)


def _method_refit(panel: TimeSeriesPanel, method: str, p: int) -> FitResult:
    return fit_method(method, center(panel), p)


def _one_replicate(r, coefficients, error, length, seed, horizon, refit):
    sim = simulate_var(coefficients, error, length, seed=[seed, r])
    refit_result = refit(sim)
    res = girf(refit_result, horizon)
    return res.responses, refit_result.coefficients.vector()


def bootstrap_bands(
    fit: FitResult,
    panel: TimeSeriesPanel,
    n_boot: int,
    horizon: int = 10,
    seed: int = 0,
    level: float = 0.90,
    refit=None,
    store_coef_cov: bool = True,
    names=None,
) -> BootstrapBands:
    """Percentile confidence bands for the GIRF by parametric bootstrap.

    Each replicate simulates a path of the panel's length from the fitted
    model, re-estimates, and recomputes the responses; bands are pointwise
    percentiles at the requested coverage (5th and 95th for the default 90%).
    Replicates whose estimation fails are dropped and counted; more than 5%
    drops triggers a warning. Replicate r draws from the RNG stream seeded by
    (seed, r), so results are reproducible and independent of execution order
    or worker count (set SPARSEVAR_WORKERS above 1 to parallelize).

    ``refit`` overrides the re-estimation rule; the default repeats the fit's
    own method with its originally selected lag order and penalties.
    """
    if n_boot < 1:
        raise ValueError(f"n_boot must be positive, got {n_boot}")
    if not (0.0 < level < 1.0):
        raise ValueError(f"level must lie in (0, 1), got {level}")
    radius = stability_check(fit.coefficients)
    if radius >= 1.0:
        raise NumericalError(
            f"fitted model is unstable (spectral radius {radius:.6f}); "
            "bootstrap simulation is not defined"
        )
    point = girf(fit, horizon, names=names)
    length = panel.n_obs
    seed = int(seed)
    job = partial(
        _one_replicate,
        coefficients=fit.coefficients,
        error=fit.error,
        length=length,
        seed=seed,
        horizon=horizon,
        refit=refit if refit is not None else _default_refit(fit),
    )
    responses = []
    vectors = []
    dropped = 0
    workers = worker_count()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_guarded, [job] * n_boot, range(n_boot)))
    else:
        outcomes = [_guarded(job, r) for r in range(n_boot)]
    for out in outcomes:
        if out is None:
            dropped += 1
        else:
            responses.append(out[0])
            vectors.append(out[1])
    if not responses:
        raise NumericalError(f"all {n_boot} bootstrap replicates failed")
    if dropped > 0.05 * n_boot:
        warnings.warn(
            f"{dropped} of {n_boot} bootstrap replicates failed and were dropped",
            RuntimeWarning,
            stacklevel=2,
        )
    stack_resp = np.stack(responses)
    tail = 100.0 * (1.0 - level) / 2.0
    lower = np.percentile(stack_resp, tail, axis=0)
    upper = np.percentile(stack_resp, 100.0 - tail, axis=0)
    coef_cov = None
    if store_coef_cov and len(vectors) >= 2:
        mat = np.stack(vectors)
        coef_cov = np.atleast_2d(np.cov(mat, rowvar=False))
    lower.flags.writeable = False
    upper.flags.writeable = False
    return BootstrapBands(point, lower, upper, level, n_boot, dropped, coef_cov)


def _guarded(job, r):
    try:
        return job(r)
    except (NumericalError, np.linalg.LinAlgError):
        return None


def girf_to_csv(result, path) -> None:
    """Write responses (and bands when present) as one row per
    impulse/response/horizon triple. Band cells are empty without a bootstrap."""
    if isinstance(result, BootstrapBands):
        point, lower, upper = result.point, result.lower, result.upper
    else:
        point, lower, upper = result, None, None
    names = point.names
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["impulse", "response", "horizon", "value", "lower", "upper"])
        q, h = point.q, point.horizon
        for j in range(q):
            for i in range(q):
                for k in range(h + 1):
                    row = [names[j], names[i], k, repr(float(point.responses[j, i, k]))]
                    if lower is not None:
                        row += [repr(float(lower[j, i, k])), repr(float(upper[j, i, k]))]
                    else:
                        row += ["", ""]
                    writer.writerow(row)
