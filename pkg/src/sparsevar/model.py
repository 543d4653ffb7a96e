"""Vector autoregression core: domain types, simulation, lag stacking, stability.

The model is a mean-centered VAR(p) without intercept,

    y_t = B_1 y_{t-1} + ... + B_p y_{t-p} + e_t,    e_t ~ N_q(0, sigma),

estimated from the stacked regression form y = X beta + e with X = I_q (x) X0,
where X0 holds the lagged observations and beta stacks the coefficient
matrices equation by equation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import NumericalError

__all__ = [
    "TimeSeriesPanel",
    "VarCoefficients",
    "ErrorModel",
    "StackedDesign",
    "center",
    "uncenter",
    "stack",
    "companion_matrix",
    "stability_check",
    "simulate_var",
    "forecast_one_step",
]


def _frozen_array(values, dtype=np.float64) -> np.ndarray:
    """Owned, C-contiguous, read-only copy of ``values``."""
    out = np.array(values, dtype=dtype, copy=True, order="C")
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class TimeSeriesPanel:
    """A T x q block of observations plus the per-series means removed from it.

    ``means`` is all zeros for raw data; :func:`center` moves the column means
    out of ``data`` and into ``means`` so the no-intercept model applies.
    """

    data: np.ndarray
    names: tuple[str, ...]
    means: np.ndarray

    def __init__(self, data, names=None, means=None):
        data = _frozen_array(data)
        if data.ndim != 2:
            raise ValueError(f"panel data must be 2-dimensional, got shape {data.shape}")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError(f"panel must have at least one row and one column, got {data.shape}")
        if not np.all(np.isfinite(data)):
            bad = np.argwhere(~np.isfinite(data))[0]
            raise ValueError(f"panel contains a non-finite value at row {bad[0]}, column {bad[1]}")
        q = data.shape[1]
        if names is None:
            names = tuple(f"y{i + 1}" for i in range(q))
        else:
            names = tuple(str(s) for s in names)
        if len(names) != q:
            raise ValueError(f"expected {q} series names, got {len(names)}")
        if len(set(names)) != q:
            raise ValueError("series names must be unique")
        if means is None:
            means = np.zeros(q)
        means = _frozen_array(means)
        if means.shape != (q,):
            raise ValueError(f"means must have shape ({q},), got {means.shape}")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "means", means)

    @property
    def n_obs(self) -> int:
        return self.data.shape[0]

    @property
    def n_series(self) -> int:
        return self.data.shape[1]

    def is_centered(self, tol: float = 1e-8) -> bool:
        """True when every column mean is within ``tol`` of zero (scaled by the data magnitude)."""
        scale = max(1.0, float(np.max(np.abs(self.data))))
        return bool(np.max(np.abs(self.data.mean(axis=0))) <= tol * scale)

    def center(self) -> "TimeSeriesPanel":
        """Remove column means, accumulating them into ``means``."""
        mu = self.data.mean(axis=0)
        return TimeSeriesPanel(self.data - mu, self.names, self.means + mu)

    def uncenter(self) -> "TimeSeriesPanel":
        """Add the recorded means back onto the data. Inverse of :meth:`center`."""
        return TimeSeriesPanel(self.data + self.means, self.names, np.zeros(self.n_series))


def center(panel: TimeSeriesPanel) -> TimeSeriesPanel:
    return panel.center()


def uncenter(panel: TimeSeriesPanel) -> TimeSeriesPanel:
    return panel.uncenter()


@dataclass(frozen=True)
class VarCoefficients:
    """Autoregressive coefficient matrices, stored as a (p, q, q) stack.

    ``b[j]`` multiplies the observation j+1 steps back: entry ``b[j][i, k]`` is
    the effect of series k at lag j+1 on series i.
    """

    b: np.ndarray

    def __init__(self, b):
        b = _frozen_array(b)
        if b.ndim != 3 or b.shape[1] != b.shape[2]:
            raise ValueError(f"coefficients must have shape (p, q, q), got {b.shape}")
        if b.shape[0] < 1:
            raise ValueError("at least one lag matrix is required")
        if not np.all(np.isfinite(b)):
            raise ValueError("coefficients contain non-finite values")
        object.__setattr__(self, "b", b)

    @property
    def p(self) -> int:
        return self.b.shape[0]

    @property
    def q(self) -> int:
        return self.b.shape[1]

    def matrix_stack(self) -> np.ndarray:
        """(pq, q) matrix whose column i holds equation i's coefficients in
        lag-major, series-minor order, matching the columns of the stacked design."""
        return np.concatenate([self.b[j].T for j in range(self.p)], axis=0)

    @classmethod
    def from_matrix_stack(cls, stacked: np.ndarray, p: int) -> "VarCoefficients":
        stacked = np.asarray(stacked, dtype=np.float64)
        q = stacked.shape[1]
        if stacked.shape != (p * q, q):
            raise ValueError(f"expected shape ({p * q}, {q}), got {stacked.shape}")
        b = np.stack([stacked[j * q:(j + 1) * q, :].T for j in range(p)])
        return cls(b)

    def vector(self) -> np.ndarray:
        """Length p*q*q coefficient vector, equations stacked one after another."""
        return self.matrix_stack().flatten(order="F")

    @classmethod
    def from_vector(cls, beta: np.ndarray, p: int, q: int) -> "VarCoefficients":
        beta = np.asarray(beta, dtype=np.float64)
        if beta.shape != (p * q * q,):
            raise ValueError(f"expected a vector of length {p * q * q}, got shape {beta.shape}")
        return cls.from_matrix_stack(beta.reshape((p * q, q), order="F"), p)

    def cell_mask(self) -> np.ndarray:
        """(q, q) boolean matrix: True where any lag has a nonzero coefficient."""
        return np.any(self.b != 0.0, axis=0)

    def zero_cells_coincide(self) -> bool:
        """True when every (i, k) cell is zero in all lag matrices or in none.

        This is the structural consequence of the lag-grouped penalty: a cross
        effect is switched off across all lags jointly.
        """
        masks = self.b != 0.0
        return bool(np.all(np.all(masks, axis=0) | np.all(~masks, axis=0)))


@dataclass(frozen=True)
class ErrorModel:
    """Error covariance and its inverse (the precision matrix), kept in sync."""

    sigma: np.ndarray
    omega: np.ndarray

    def __init__(self, sigma, omega):
        sigma = _frozen_array(sigma)
        omega = _frozen_array(omega)
        q = sigma.shape[0]
        if sigma.shape != (q, q) or omega.shape != (q, q):
            raise ValueError("sigma and omega must be square matrices of the same size")
        if not np.allclose(sigma, sigma.T, atol=1e-10):
            raise ValueError("sigma must be symmetric")
        if not np.allclose(omega, omega.T, atol=1e-10):
            raise ValueError("omega must be symmetric")
        prod = sigma @ omega
        if not np.allclose(prod, np.eye(q), atol=1e-8):
            worst = float(np.max(np.abs(prod - np.eye(q))))
            raise NumericalError(
                f"sigma and omega are not inverses: max |sigma @ omega - I| = {worst:.2e}"
            )
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "omega", omega)

    @property
    def q(self) -> int:
        return self.sigma.shape[0]

    @classmethod
    def from_sigma(cls, sigma: np.ndarray) -> "ErrorModel":
        """Build from a covariance matrix, inverting it for the precision."""
        sigma = np.asarray(sigma, dtype=np.float64)
        omega = _spd_inverse(sigma, "error covariance")
        return cls(sigma, omega)

    @classmethod
    def from_omega(cls, omega: np.ndarray) -> "ErrorModel":
        """Build from a precision matrix, inverting it for the covariance."""
        omega = np.asarray(omega, dtype=np.float64)
        sigma = _spd_inverse(omega, "error precision")
        return cls(sigma, omega)


def _spd_inverse(a: np.ndarray, what: str) -> np.ndarray:
    """Inverse of a symmetric positive definite matrix via Cholesky."""
    try:
        c, low = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NumericalError(f"{what} is not positive definite: {exc}") from exc
    inv = scipy.linalg.cho_solve((c, low), np.eye(a.shape[0]), check_finite=False)
    return (inv + inv.T) / 2.0


@dataclass(frozen=True)
class StackedDesign:
    """The VAR(p) written as one linear regression.

    ``response`` is the n x q matrix of left-hand sides (n = T - p rows,
    starting at time p+1), ``x0`` the shared n x pq regressor block whose row t
    concatenates the observations at times t+p-1, ..., t, i.e. lags 1..p in
    lag-major, series-minor column order. ``y`` flattens ``response`` column by
    column, so the full design acting on the coefficient vector is I_q (x) x0.
    """

    response: np.ndarray
    x0: np.ndarray
    p: int

    def __init__(self, response, x0, p):
        response = _frozen_array(response)
        x0 = _frozen_array(x0)
        n, q = response.shape
        if x0.shape != (n, int(p) * q):
            raise ValueError(
                f"regressor block must have shape ({n}, {int(p) * q}), got {x0.shape}"
            )
        object.__setattr__(self, "response", response)
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "p", int(p))

    @property
    def n(self) -> int:
        return self.response.shape[0]

    @property
    def q(self) -> int:
        return self.response.shape[1]

    @property
    def y(self) -> np.ndarray:
        """Responses as one vector of length n*q, equation by equation."""
        return self.response.flatten(order="F")

    def design_matrix(self) -> np.ndarray:
        """Dense I_q (x) x0, size nq x pq^2. Intended for small problems and tests."""
        return np.kron(np.eye(self.q), self.x0)

    def residual_matrix(self, coefficients: VarCoefficients) -> np.ndarray:
        """n x q residuals, response minus fitted values."""
        return self.response - self.x0 @ coefficients.matrix_stack()


def stack(panel: TimeSeriesPanel, p: int) -> StackedDesign:
    """Arrange a panel into the stacked regression form for lag order ``p``.

    Parameters
    ----------
    panel : TimeSeriesPanel
        Observations, ordinarily centered.
    p : int
        Lag order, at least 1; the panel must be longer than ``p``.
    """
    if p < 1:
        raise ValueError(f"lag order must be at least 1, got {p}")
    data = panel.data
    big_t, q = data.shape
    if big_t <= p:
        raise ValueError(f"panel length {big_t} must exceed the lag order {p}")
    n = big_t - p
    x0 = np.empty((n, p * q))
    for j in range(1, p + 1):
        x0[:, (j - 1) * q:j * q] = data[p - j:big_t - j, :]
    return StackedDesign(data[p:, :], x0, p)


def companion_matrix(coefficients: VarCoefficients) -> np.ndarray:
    """The pq x pq companion form: lag matrices across the top row of blocks,
    identity blocks on the subdiagonal."""
    p, q = coefficients.p, coefficients.q
    comp = np.zeros((p * q, p * q))
    for j in range(p):
        comp[:q, j * q:(j + 1) * q] = coefficients.b[j]
    if p > 1:
        comp[q:, :-q] = np.eye((p - 1) * q)
    return comp


def stability_check(coefficients: VarCoefficients) -> float:
    """Spectral radius of the companion matrix. Strictly below 1 means stable."""
    eigs = np.linalg.eigvals(companion_matrix(coefficients))
    return float(np.max(np.abs(eigs)))


def simulate_var(
    coefficients: VarCoefficients,
    error: ErrorModel,
    length: int,
    seed,
    burn_in: int = 200,
    names=None,
    noise_scale: float = 1.0,
) -> TimeSeriesPanel:
    """Draw a stationary sample path of the VAR.

    The recursion starts from zeros, runs ``burn_in`` extra steps that are
    discarded, and colors standard normal draws with the lower Cholesky factor
    of the error covariance. Draw order is fixed (one q-vector per time step),
    so a given seed reproduces the panel bit for bit.

    Parameters
    ----------
    coefficients : VarCoefficients
        Must be stable; the spectral radius is checked first.
    error : ErrorModel
        Error covariance (its lower Cholesky factor colors the shocks).
    length : int
        Number of rows returned.
    seed : int, sequence of int, SeedSequence, or Generator
        Anything accepted by ``numpy.random.default_rng``.
    burn_in : int
        Discarded warm-up steps, default 200.
    noise_scale : float
        Multiplier on the shocks; 0 gives the deterministic recursion.
    """
    if length < 1:
        raise ValueError(f"length must be positive, got {length}")
    if burn_in < 0:
        raise ValueError(f"burn_in must be nonnegative, got {burn_in}")
    if noise_scale < 0:
        raise ValueError(f"noise_scale must be nonnegative, got {noise_scale}")
    if error.q != coefficients.q:
        raise ValueError(
            f"error model has {error.q} series but coefficients have {coefficients.q}"
        )
    radius = stability_check(coefficients)
    if radius >= 1.0:
        raise NumericalError(
            f"coefficients are unstable: companion spectral radius {radius:.6f} >= 1"
        )
    p, q = coefficients.p, coefficients.q
    try:
        chol = scipy.linalg.cholesky(error.sigma, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NumericalError(f"error covariance is not positive definite: {exc}") from exc
    rng = np.random.default_rng(seed)
    steps = burn_in + length
    shocks = rng.standard_normal((steps, q)) @ chol.T
    if noise_scale != 1.0:
        shocks = shocks * noise_scale
    path = np.zeros((p + steps, q))
    b = coefficients.b
    for t in range(p, p + steps):
        acc = shocks[t - p]
        for j in range(p):
            acc = acc + b[j] @ path[t - 1 - j]
        path[t] = acc
    return TimeSeriesPanel(path[p + burn_in:], names)


def forecast_one_step(coefficients: VarCoefficients, history: np.ndarray) -> np.ndarray:
    """One-step-ahead point forecast from the last p rows of ``history``.

    ``history`` is in the same (centered) scale the coefficients were fit on;
    callers add means back themselves.
    """
    history = np.asarray(history, dtype=np.float64)
    p, q = coefficients.p, coefficients.q
    if history.ndim != 2 or history.shape[1] != q or history.shape[0] < p:
        raise ValueError(
            f"history must be at least ({p}, {q}), got shape {history.shape}"
        )
    out = np.zeros(q)
    for j in range(p):
        out += coefficients.b[j] @ history[-1 - j]
    return out
