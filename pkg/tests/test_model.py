"""Core model tests: simulation, stacking, centering, stability."""

import numpy as np
import pytest

from sparsevar.exceptions import DataError, NumericalError
from sparsevar.model import (
    ErrorModel,
    TimeSeriesPanel,
    VarCoefficients,
    center,
    companion_matrix,
    forecast_one_step,
    simulate_var,
    stability_check,
    stack,
    uncenter,
)


from helpers import leader_blocks, stable_random_coefs


class TestVarCoefficients:
    def test_shapes_and_counts(self):
        coefs = leader_blocks()
        assert coefs.p == 2
        assert coefs.q == 10
        assert np.count_nonzero(coefs.vector()) == 36
        assert coefs.vector().size == 200

    def test_matrix_stack_round_trip(self):
        coefs = leader_blocks()
        rebuilt = VarCoefficients.from_matrix_stack(coefs.matrix_stack(), coefs.p)
        assert np.array_equal(rebuilt.vector(), coefs.vector())

    def test_vector_round_trip(self):
        rng = np.random.default_rng(3)
        coefs = VarCoefficients(0.1 * rng.standard_normal((3, 4, 4)))
        rebuilt = VarCoefficients.from_vector(coefs.vector(), p=3, q=4)
        assert np.array_equal(rebuilt.matrix_stack(), coefs.matrix_stack())

    def test_non_finite_rejected(self):
        b = np.zeros((1, 2, 2))
        b[0, 0, 0] = np.nan
        with pytest.raises((ValueError, DataError)):
            VarCoefficients(b)

    def test_zero_cells_coincide(self):
        coefs = leader_blocks()
        assert coefs.zero_cells_coincide()
        broken = coefs.matrix_stack().copy()
        broken[0, 9] = 0.3  # lag-1 cell active, lag-2 cell still zero
        assert not VarCoefficients.from_matrix_stack(broken, 2).zero_cells_coincide()


class TestErrorModel:
    def test_inverse_consistency(self):
        sigma = np.array([[2.0, 0.5], [0.5, 1.0]])
        em = ErrorModel.from_sigma(sigma)
        assert np.max(np.abs(em.sigma @ em.omega - np.eye(2))) < 1e-8

    def test_mismatched_pair_rejected(self):
        with pytest.raises(NumericalError):
            ErrorModel(np.eye(2), 2.0 * np.eye(2))

    def test_asymmetric_rejected(self):
        bad = np.array([[1.0, 0.2], [0.1, 1.0]])
        with pytest.raises((ValueError, NumericalError)):
            ErrorModel.from_sigma(bad)

    def test_non_pd_rejected(self):
        with pytest.raises(NumericalError):
            ErrorModel.from_sigma(np.array([[1.0, 2.0], [2.0, 1.0]]))


class TestCentering:
    def test_constant_column_zeroed(self):
        panel = TimeSeriesPanel(np.column_stack([np.full(5, 3.0), np.arange(5.0)]))
        centered = center(panel)
        assert np.max(np.abs(centered.data[:, 0])) == 0.0
        assert centered.means[0] == pytest.approx(3.0)
        assert abs(centered.data.sum(axis=0)).max() < 1e-10 * 5

    def test_already_centered_unchanged(self):
        rng = np.random.default_rng(0)
        data = rng.standard_normal((40, 3))
        data -= data.mean(axis=0)
        centered = center(TimeSeriesPanel(data))
        assert np.max(np.abs(centered.data - data)) < 1e-12

    def test_round_trip(self):
        rng = np.random.default_rng(1)
        panel = TimeSeriesPanel(rng.standard_normal((30, 4)) + 5.0)
        back = uncenter(center(panel))
        assert np.max(np.abs(back.data - panel.data)) < 1e-12

    def test_method_forms_match_module_functions(self):
        rng = np.random.default_rng(2)
        panel = TimeSeriesPanel(rng.standard_normal((10, 2)) + 1.0)
        assert np.array_equal(panel.center().data, center(panel).data)


class TestSimulate:
    def test_shape_and_determinism(self):
        coefs = leader_blocks()
        err = ErrorModel.from_sigma(0.1 * np.eye(10))
        a = simulate_var(coefs, err, length=50, seed=11)
        b = simulate_var(coefs, err, length=50, seed=11)
        assert a.data.shape == (50, 10)
        assert np.array_equal(a.data, b.data)  # bitwise
        c = simulate_var(coefs, err, length=50, seed=12)
        assert not np.array_equal(a.data, c.data)

    def test_zero_dynamics_iid_noise(self):
        coefs = VarCoefficients(np.zeros((1, 3, 3)))
        err = ErrorModel.from_sigma(np.eye(3))
        panel = simulate_var(coefs, err, length=2000, seed=4)
        # rows should behave like iid standard normal draws
        assert abs(panel.data.mean()) < 0.1
        assert abs(panel.data.var() - 1.0) < 0.1
        lag_corr = np.corrcoef(panel.data[:-1, 0], panel.data[1:, 0])[0, 1]
        assert abs(lag_corr) < 0.1

    def test_zero_noise_zero_dynamics_exact_zero(self):
        coefs = VarCoefficients(np.zeros((1, 2, 2)))
        err = ErrorModel.from_sigma(np.eye(2))
        panel = simulate_var(coefs, err, length=5, seed=0, noise_scale=0.0)
        assert np.array_equal(panel.data, np.zeros((5, 2)))

    def test_ar1_stationary_variance(self):
        # var = sigma^2 / (1 - b^2) = 1 / 0.75
        coefs = VarCoefficients([[[0.5]]])
        err = ErrorModel.from_sigma(np.eye(1))
        panel = simulate_var(coefs, err, length=100_000, seed=5)
        target = 1.0 / 0.75
        assert abs(panel.data.var() - target) / target < 0.03

    def test_sample_mean_near_zero(self):
        coefs = leader_blocks()
        err = ErrorModel.from_sigma(0.1 * np.eye(10))
        panel = simulate_var(coefs, err, length=100_000, seed=6)
        # stationary mean is 0; allow 5 standard errors
        sd = panel.data.std(axis=0)
        se = sd / np.sqrt(panel.data.shape[0])
        assert np.all(np.abs(panel.data.mean(axis=0)) < 5 * se * 10)

    def test_unstable_spec_rejected(self):
        coefs = VarCoefficients([[[1.05]]])
        err = ErrorModel.from_sigma(np.eye(1))
        with pytest.raises(NumericalError, match="radius"):
            simulate_var(coefs, err, length=10, seed=0)


class TestStack:
    def test_toy_indexing(self):
        # T=4, q=2, p=1: n=3, first x0 row is the time-1 observation,
        # first y segment is series 1 at times 2..4
        data = np.arange(8.0).reshape(4, 2)
        design = stack(TimeSeriesPanel(data), p=1)
        assert design.n == 3
        assert np.array_equal(design.x0[0], data[0])
        assert np.array_equal(design.y[:3], data[1:, 0])
        assert np.array_equal(design.y[3:], data[1:, 1])

    def test_lag_ordering_within_row(self):
        # row t of x0 concatenates lag-1 then lag-2 observations
        data = np.arange(10.0).reshape(5, 2)
        design = stack(TimeSeriesPanel(data), p=2)
        assert design.n == 3
        assert np.array_equal(design.x0[0], np.concatenate([data[1], data[0]]))
        assert np.array_equal(design.x0[2], np.concatenate([data[3], data[2]]))

    def test_paper_scale_shapes(self):
        coefs = leader_blocks()
        err = ErrorModel.from_sigma(0.1 * np.eye(10))
        panel = simulate_var(coefs, err, length=50, seed=7)
        design = stack(panel, p=2)
        assert design.y.shape == (480,)
        assert design.x0.shape == (48, 20)

    def test_too_short_rejected(self):
        panel = TimeSeriesPanel(np.zeros((3, 2)))
        with pytest.raises(ValueError):
            stack(panel, p=3)

    def test_exact_regression_identity(self):
        # y = X beta + e holds exactly when the residual rows are recorded
        rng = np.random.default_rng(8)
        coefs = stable_random_coefs(rng, q=3, p=2, scale=0.2)
        err = ErrorModel.from_sigma(np.eye(3))
        panel = simulate_var(coefs, err, length=40, seed=9)
        design = stack(panel, p=2)
        resid = design.residual_matrix(coefs)
        x = design.design_matrix()
        recon = x @ coefs.vector() + resid.T.ravel()
        assert np.max(np.abs(recon - design.y)) < 1e-10

    def test_noise_free_ls_recovery(self):
        # regressing the exact linear response on the stacked design must give
        # back the planted coefficients
        rng = np.random.default_rng(10)
        for trial in range(5):
            q = int(rng.integers(2, 6))
            p = int(rng.integers(1, 4))
            coefs = stable_random_coefs(rng, q, p)
            err = ErrorModel.from_sigma(np.eye(q))
            panel = simulate_var(coefs, err, length=30 + p * q * 4, seed=100 + trial)
            design = stack(panel, p)
            x = design.design_matrix()
            target = x @ coefs.vector()
            beta, *_ = np.linalg.lstsq(x, target, rcond=None)
            assert np.max(np.abs(beta - coefs.vector())) < 1e-10


class TestStability:
    def test_scalar_half(self):
        assert stability_check(VarCoefficients([[[0.5]]])) == pytest.approx(0.5)

    def test_unit_root(self):
        assert stability_check(VarCoefficients([[[1.0]]])) == pytest.approx(1.0)

    def test_paper_design_radius(self):
        # frozen from an independent eigenvalue computation of the hand-built
        # 20x20 companion matrix
        radius = stability_check(leader_blocks())
        assert radius == pytest.approx(0.6898979485566362, abs=1e-9)
        assert radius < 1.0

    def test_companion_shape(self):
        comp = companion_matrix(leader_blocks())
        assert comp.shape == (20, 20)
        assert np.array_equal(comp[10:, :10], np.eye(10))
        assert np.array_equal(comp[10:, 10:], np.zeros((10, 10)))


class TestForecast:
    def test_one_step_matches_hand_formula(self):
        b1 = np.array([[0.5, 0.1], [0.0, 0.3]])
        b2 = np.array([[0.1, 0.0], [0.2, 0.1]])
        coefs = VarCoefficients([b1, b2])
        history = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        pred = forecast_one_step(coefs, history)
        expected = b1 @ history[-1] + b2 @ history[-2]
        assert np.max(np.abs(pred - expected)) < 1e-12

    def test_history_too_short(self):
        coefs = VarCoefficients(np.zeros((3, 2, 2)))
        with pytest.raises(ValueError):
            forecast_one_step(coefs, np.zeros((2, 2)))
