"""Whitened group-lasso solver tests: whitening identities, oracles, KKT."""

import numpy as np
import pytest

from sparsevar.exceptions import NumericalError
from sparsevar.grouplasso import (
    GroupStructure,
    group_kkt_violation,
    lambda1_max,
    solve_group_lasso,
    whiten,
)
from sparsevar.model import (
    ErrorModel,
    StackedDesign,
    TimeSeriesPanel,
    simulate_var,
    stack,
)
from helpers import stable_random_coefs


def random_problem(seed, q=3, p=2, length=60, omega=None):
    rng = np.random.default_rng(seed)
    coefs = stable_random_coefs(rng, q, p)
    err = ErrorModel.from_sigma(np.eye(q))
    panel = simulate_var(coefs, err, length=length, seed=seed + 1000)
    design = stack(panel.center(), p)
    if omega is None:
        a = rng.standard_normal((q, q))
        omega = a @ a.T + q * np.eye(q)
    return whiten(design, omega)


def gls_oracle(problem):
    # (X' (Omega (x) I) X)^-1 X' (Omega (x) I) y on the dense representation
    n = problem.n
    x = np.kron(np.eye(problem.q), problem.design.x0)
    y = problem.design.response.flatten(order="F")
    w = np.kron(problem.omega, np.eye(n))
    return np.linalg.solve(x.T @ w @ x, x.T @ w @ y)


class TestGroupStructure:
    def test_partition_exact(self):
        g = GroupStructure(q=3, p=2)
        assert g.n_groups == 9
        assert g.n_coefficients == 18
        seen = np.concatenate([g.indices(i, k) for i, k in g.groups()])
        assert sorted(seen.tolist()) == list(range(18))
        for i, k in g.groups():
            assert g.indices(i, k).size == 2

    def test_indices_match_vector_layout(self):
        # planting one group in bmat must light up exactly indices(i, k)
        q, p = 3, 2
        g = GroupStructure(q=q, p=p)
        for i, k in ((0, 0), (1, 2), (2, 1)):
            bmat = np.zeros((p * q, q))
            for j in range(p):
                bmat[j * q + k, i] = 1.0
            vec = bmat.flatten(order="F")
            assert sorted(np.flatnonzero(vec).tolist()) == sorted(
                g.indices(i, k).tolist()
            )

    def test_bad_group_rejected(self):
        g = GroupStructure(q=2, p=1)
        with pytest.raises(ValueError):
            g.indices(2, 0)


class TestWhiten:
    def test_identity_omega_is_noop(self):
        problem = random_problem(0, omega=np.eye(3))
        assert np.array_equal(problem.y_tilde(), problem.design.y)
        assert np.allclose(
            problem.x_tilde_dense(), problem.design.design_matrix(), atol=1e-14
        )

    def test_toy_quadratic_form_identity(self):
        # q=2, n=3: whitened inner products must equal the dense Kronecker forms
        rng = np.random.default_rng(1)
        response = rng.standard_normal((3, 2))
        x0 = rng.standard_normal((3, 2))
        design = StackedDesign(response, x0, p=1)
        omega = np.array([[2.0, 1.0], [1.0, 2.0]])
        problem = whiten(design, omega)
        y = design.y
        big = np.kron(omega, np.eye(3))
        yt = problem.y_tilde()
        assert abs(yt @ yt - y @ big @ y) < 1e-12
        xt = problem.x_tilde_dense()
        x = design.design_matrix()
        assert np.max(np.abs(xt.T @ xt - x.T @ big @ x)) < 1e-12
        assert np.max(np.abs(xt.T @ yt - x.T @ big @ y)) < 1e-12

    def test_non_pd_omega_rejected(self):
        problem_seed = random_problem(2)
        design = problem_seed.design
        bad = np.array([[1.0, 2.0, 0.0], [2.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        with pytest.raises(NumericalError, match="positive definite"):
            whiten(design, bad)

    def test_gls_at_zero_penalty(self):
        for seed in range(5):
            problem = random_problem(seed)
            res = solve_group_lasso(
                problem, GroupStructure(problem.q, problem.p), 0.0, tol=1e-9
            )
            # oracle vector is equation-major like bmat.flatten(order="F")
            oracle = gls_oracle(problem)
            assert np.max(np.abs(res.bmat.flatten(order="F") - oracle)) < 1e-6


class TestLambdaMax:
    def test_zero_response(self):
        rng = np.random.default_rng(3)
        design = StackedDesign(np.zeros((10, 2)), rng.standard_normal((10, 2)), p=1)
        assert lambda1_max(whiten(design, np.eye(2))) == 0.0

    def test_single_group_formula(self):
        # q=1: one group, threshold is (2/n) ||x0' y|| under identity whitening
        rng = np.random.default_rng(4)
        x0 = rng.standard_normal((20, 2))
        response = rng.standard_normal((20, 1))
        design = StackedDesign(response, x0, p=2)
        problem = whiten(design, np.eye(1))
        expected = 2.0 / 20 * np.linalg.norm(x0.T @ response[:, 0])
        assert lambda1_max(problem) == pytest.approx(expected, rel=1e-12)

    def test_threshold_behavior(self):
        for seed in range(4):
            problem = random_problem(seed + 10)
            groups = GroupStructure(problem.q, problem.p)
            lmax = lambda1_max(problem)
            above = solve_group_lasso(problem, groups, 1.01 * lmax)
            assert np.count_nonzero(above.bmat) == 0
            below = solve_group_lasso(problem, groups, 0.99 * lmax)
            assert np.count_nonzero(below.bmat) > 0


class TestSolve:
    def test_orthonormal_group_soft_threshold(self):
        # single equation, one group of two orthogonal columns scaled so that
        # x0'x0 = n I; the solution is the group soft-threshold of the OLS fit
        n, p = 16, 2
        x0 = np.zeros((n, p))
        x0[: n // 2, 0] = 1.0
        x0[n // 2 :, 1] = 1.0
        x0 *= np.sqrt(2.0)  # columns now have squared norm n
        rng = np.random.default_rng(5)
        response = rng.standard_normal((n, 1))
        design = StackedDesign(response, x0, p=2)
        problem = whiten(design, np.eye(1))
        groups = GroupStructure(q=1, p=2)
        ols = x0.T @ response[:, 0] / n
        norm = np.linalg.norm(ols)
        for lam in (0.0, 0.3 * norm, norm, 1.9 * norm, 2.0 * norm, 2.5 * norm):
            res = solve_group_lasso(problem, groups, float(lam))
            shrink = max(0.0, 1.0 - lam / (2.0 * norm))
            expected = shrink * ols
            assert np.max(np.abs(res.bmat[:, 0] - expected)) < 1e-8

    def test_group_sparsity_structural(self):
        for seed in range(6):
            problem = random_problem(seed + 20)
            groups = GroupStructure(problem.q, problem.p)
            lam = 0.4 * lambda1_max(problem)
            res = solve_group_lasso(problem, groups, lam)
            for i, k in groups.groups():
                block = res.bmat.flatten(order="F")[groups.indices(i, k)]
                assert np.all(block == 0.0) or np.all(block != 0.0)

    def test_objective_monotone(self):
        problem = random_problem(30)
        groups = GroupStructure(problem.q, problem.p)
        res = solve_group_lasso(
            problem, groups, 0.2 * lambda1_max(problem), track_objective=True
        )
        path = np.asarray(res.objective_path)
        assert path.size >= 1
        assert np.all(np.diff(path) <= 1e-10)

    def test_kkt_certificate_random_instances(self):
        rng = np.random.default_rng(31)
        for trial in range(12):
            q = int(rng.integers(2, 5))
            p = int(rng.integers(1, 3))
            problem = random_problem(400 + trial, q=q, p=p, length=40 + p)
            groups = GroupStructure(q, p)
            frac = float(rng.uniform(0.05, 1.2))
            lam = frac * lambda1_max(problem)
            res = solve_group_lasso(problem, groups, lam)
            assert res.converged
            assert res.kkt_violation <= 1e-5
            assert group_kkt_violation(problem, res.bmat, lam) <= 1e-5

    def test_warm_start_agrees_with_cold(self):
        problem = random_problem(32)
        groups = GroupStructure(problem.q, problem.p)
        lmax = lambda1_max(problem)
        cold = solve_group_lasso(problem, groups, 0.3 * lmax)
        warm_src = solve_group_lasso(problem, groups, 0.5 * lmax)
        warm = solve_group_lasso(problem, groups, 0.3 * lmax, bmat0=warm_src.bmat)
        assert np.max(np.abs(cold.bmat - warm.bmat)) < 1e-5

    def test_negative_penalty_rejected(self):
        problem = random_problem(33)
        with pytest.raises(ValueError):
            solve_group_lasso(problem, GroupStructure(problem.q, problem.p), -0.1)
