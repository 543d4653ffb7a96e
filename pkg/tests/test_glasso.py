"""Penalized precision estimation tests: oracles, screening, KKT, PD."""

import numpy as np
import pytest

from sparsevar.exceptions import NumericalError
from sparsevar.glasso import (
    glasso_kkt_violation,
    glasso_objective,
    lambda2_max,
    residual_covariance,
    solve_glasso,
)
from sparsevar.model import ErrorModel, StackedDesign, TimeSeriesPanel, simulate_var, stack
from helpers import stable_random_coefs


def random_covariance(rng, q, base=1.0):
    a = rng.standard_normal((q + 5, q))
    s = a.T @ a / (q + 5)
    return s + base * np.eye(q) * 0.1


class TestResidualCovariance:
    def test_zero_residuals(self):
        rng = np.random.default_rng(0)
        coefs = stable_random_coefs(rng, 2, 1)
        err = ErrorModel.from_sigma(np.eye(2))
        panel = simulate_var(coefs, err, length=20, seed=1)
        design = stack(panel, 1)
        x = design.design_matrix()
        # build a response that the coefficients explain exactly
        exact = x @ coefs.vector()
        resp = exact.reshape(2, design.n).T.copy()
        shim = StackedDesign(resp, design.x0, 1)
        s = residual_covariance(shim, coefs)
        assert np.max(np.abs(s)) < 1e-12

    def test_hand_example(self):
        # two residual rows e_1 = (1, 0), e_2 = (0, 1): S = 0.5 I
        resp = np.array([[1.0, 0.0], [0.0, 1.0]])
        design = StackedDesign(resp, np.zeros((2, 2)), 1)
        from sparsevar.model import VarCoefficients

        coefs = VarCoefficients(np.zeros((1, 2, 2)))
        s = residual_covariance(design, coefs)
        assert np.max(np.abs(s - 0.5 * np.eye(2))) < 1e-15

    def test_trace_identity_vs_kronecker(self):
        # n * trace(omega S) must equal the stacked quadratic form
        # (y - X beta)' (omega (x) I_n) (y - X beta)
        rng = np.random.default_rng(2)
        for seed in range(4):
            coefs = stable_random_coefs(rng, 3, 2)
            err = ErrorModel.from_sigma(np.eye(3))
            panel = simulate_var(coefs, err, length=25, seed=seed + 40)
            design = stack(panel, 2)
            s = residual_covariance(design, coefs)
            a = rng.standard_normal((3, 3))
            omega = a @ a.T + 3 * np.eye(3)
            resid = design.y - design.design_matrix() @ coefs.vector()
            big = np.kron(omega, np.eye(design.n))
            quad = resid @ big @ resid
            assert abs(design.n * np.trace(omega @ s) - quad) < 1e-10 * max(quad, 1)

    def test_symmetric_psd(self):
        rng = np.random.default_rng(3)
        coefs = stable_random_coefs(rng, 4, 1)
        err = ErrorModel.from_sigma(np.eye(4))
        panel = simulate_var(coefs, err, length=30, seed=5)
        design = stack(panel, 1)
        s = residual_covariance(design, coefs)
        assert np.max(np.abs(s - s.T)) < 1e-14
        assert np.linalg.eigvalsh(s)[0] > -1e-12


class TestSolveGlasso:
    def test_diagonal_s_any_penalty(self):
        s = np.diag([2.0, 0.5, 1.25])
        expected = np.diag([0.5, 2.0, 0.8])
        for lam2 in (0.0, 0.05, 0.7, 10.0):
            res = solve_glasso(s, lam2)
            assert np.count_nonzero(res.omega - np.diag(np.diag(res.omega))) == 0
            assert np.max(np.abs(res.omega - expected)) < 1e-12
        # above the (zero) off-diagonal threshold the shortcut is exact
        assert np.array_equal(solve_glasso(s, 0.05).omega, expected)

    def test_zero_penalty_inverse_oracle(self):
        rng = np.random.default_rng(4)
        for q in (2, 3, 5):
            s = random_covariance(rng, q)
            res = solve_glasso(s, 0.0)
            assert np.max(np.abs(res.omega - np.linalg.inv(s))) < 1e-6
            assert np.max(np.abs(res.sigma - s)) < 1e-10

    def test_screening_threshold_exactly_diagonal(self):
        rng = np.random.default_rng(5)
        s = random_covariance(rng, 4)
        lam = lambda2_max(s)
        res = solve_glasso(s, lam)
        off = res.omega - np.diag(np.diag(res.omega))
        assert np.count_nonzero(off) == 0
        assert np.allclose(np.diag(res.omega), 1.0 / np.diag(s))

    def test_dense_at_zero_sparse_at_threshold(self):
        rng = np.random.default_rng(6)
        s = random_covariance(rng, 4)
        dense = solve_glasso(s, 0.0)
        off = dense.omega - np.diag(np.diag(dense.omega))
        assert np.count_nonzero(off) == 4 * 3  # generically full
        assert np.count_nonzero(
            solve_glasso(s, lambda2_max(s)).omega
            - np.diag(np.diag(solve_glasso(s, lambda2_max(s)).omega))
        ) == 0

    def test_singular_s_zero_penalty_rejected(self):
        v = np.array([[1.0], [1.0]])
        s = v @ v.T  # rank one
        with pytest.raises(NumericalError, match="lambda2"):
            solve_glasso(s, 0.0)

    def test_singular_s_positive_penalty_works(self):
        v = np.array([[1.0], [1.0]])
        s = v @ v.T + np.diag([0.1, 0.1])
        res = solve_glasso(s, 0.3)
        assert np.linalg.eigvalsh(res.omega)[0] > 0

    def test_kkt_and_pd_random_instances(self):
        rng = np.random.default_rng(7)
        for trial in range(12):
            q = int(rng.integers(2, 7))
            s = random_covariance(rng, q)
            lam2 = float(rng.uniform(0.01, 1.0)) * max(lambda2_max(s), 0.05)
            res = solve_glasso(s, lam2)
            assert res.converged
            assert res.kkt_violation <= 1e-4
            assert glasso_kkt_violation(s, res.omega, lam2) <= 1e-4
            assert np.linalg.eigvalsh(res.omega)[0] > 0
            assert np.max(np.abs(res.omega - res.omega.T)) < 1e-10
            # reported sigma is the exact inverse of the reported omega
            assert np.max(np.abs(res.sigma @ res.omega - np.eye(q))) < 1e-8

    def test_objective_monotone_over_cycles(self):
        rng = np.random.default_rng(8)
        for trial in range(6):
            q = int(rng.integers(3, 6))
            s = random_covariance(rng, q)
            lam2 = 0.3 * lambda2_max(s)
            res = solve_glasso(s, lam2, track_objective=True)
            path = np.asarray(res.objective_path)
            assert path.size >= 1
            assert np.all(np.diff(path) <= 1e-8)
            # final objective beats the diagonal start
            start = glasso_objective(s, np.diag(1.0 / np.diag(s)), lam2)
            assert path[-1] <= start + 1e-12

    def test_q1_scalar(self):
        res = solve_glasso(np.array([[4.0]]), 0.5)
        assert res.omega[0, 0] == pytest.approx(0.25)

    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError):
            solve_glasso(np.array([[1.0, 0.2], [0.1, 1.0]]), 0.1)

    def test_negative_penalty_rejected(self):
        with pytest.raises(ValueError):
            solve_glasso(np.eye(2), -0.5)

    def test_nonpositive_diagonal_rejected(self):
        with pytest.raises(NumericalError):
            solve_glasso(np.diag([1.0, 0.0]), 0.1)
