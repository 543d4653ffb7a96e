"""Baseline VAR estimators sharing the sparse estimator's result shape.

All five fit the same centered no-intercept VAR(p) and return a
:class:`~sparsevar.estimator.FitResult`, so impulse responses, rolling
forecasts, and the evaluation harness can swap estimators freely:

- plain equation-wise least squares,
- one-step restricted least squares (drop |t| <= 1, refit once),
- iteratively restricted least squares (greedy backward elimination by BIC),
- a Minnesota-style normal prior with fixed diagonal error covariance,
- a conjugate matrix-normal inverse-Wishart prior.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .estimator import FitResult, _check_centered
from .exceptions import NumericalError
from .model import ErrorModel, StackedDesign, TimeSeriesPanel, VarCoefficients, stack

__all__ = [
    "MinnesotaHyper",
    "NiwHyper",
    "ls_fit",
    "restricted_ls_1step",
    "restricted_ls_iterative",
    "minnesota_fit",
    "niw_fit",
]


def _ols_gram(design: StackedDesign):
    """Cholesky of the shared regressor Gram matrix, or a clear failure."""
    x0 = design.x0
    gram = x0.T @ x0
    if design.n <= design.p * design.q:
        raise NumericalError(
            f"least squares needs more than p*q = {design.p * design.q} rows, "
            f"got n = {design.n}"
        )
    try:
        cho = scipy.linalg.cho_factor(gram, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NumericalError(f"regressor Gram matrix is singular: {exc}") from exc
    return gram, cho


def _ls_result(design: StackedDesign, bmat: np.ndarray, method: str) -> FitResult:
    coefs = VarCoefficients.from_matrix_stack(bmat, design.p)
    e = design.residual_matrix(coefs)
    sigma = e.T @ e / design.n
    sigma = (sigma + sigma.T) / 2.0
    return FitResult(
        coefficients=coefs,
        error=ErrorModel.from_sigma(sigma),
        method=method,
        p=design.p,
        lam1=None,
        lam2=None,
        bic=float("nan"),
        objective_trace=(),
        converged=True,
    )


def ls_fit(panel: TimeSeriesPanel, p: int) -> FitResult:
    """Equation-wise ordinary least squares; the error covariance is E'E/n."""
    _check_centered(panel)
    design = stack(panel, p)
    _, cho = _ols_gram(design)
    bmat = scipy.linalg.cho_solve(cho, design.x0.T @ design.response, check_finite=False)
    return _ls_result(design, bmat, "ls")


def restricted_ls_1step(panel: TimeSeriesPanel, p: int) -> FitResult:
    """Least squares, then drop every regressor with |t| <= 1 and refit once.

    t statistics use the usual OLS standard errors with residual variance
    RSS / (n - pq) per equation. Dropped coefficients are exact zeros. An
    equation may lose all its regressors; it is then identically zero.
    """
    _check_centered(panel)
    design = stack(panel, p)
    gram, cho = _ols_gram(design)
    x0, resp = design.x0, design.response
    n, k = x0.shape
    if n <= k:
        raise NumericalError(f"t statistics need n > pq, got n = {n}, pq = {k}")
    bmat = scipy.linalg.cho_solve(cho, x0.T @ resp, check_finite=False)
    gram_inv_diag = np.diag(
        scipy.linalg.cho_solve(cho, np.eye(k), check_finite=False)
    )
    resid = resp - x0 @ bmat
    out = np.zeros_like(bmat)
    for i in range(design.q):
        s2 = float(resid[:, i] @ resid[:, i]) / (n - k)
        se = np.sqrt(np.maximum(s2 * gram_inv_diag, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            tstat = np.where(se > 0.0, bmat[:, i] / se, 0.0)
        keep = np.abs(tstat) > 1.0
        if np.any(keep):
            xk = x0[:, keep]
            out[keep, i] = np.linalg.lstsq(xk, resp[:, i], rcond=None)[0]
    return _ls_result(design, out, "rls1")


def _equation_bic(rss: float, n: int, k: int) -> float:
    """Gaussian single-equation BIC up to constants: n log(RSS/n) + k log(n)."""
    return n * np.log(max(rss / n, 1e-300)) + k * np.log(n)


def restricted_ls_iterative(panel: TimeSeriesPanel, p: int) -> FitResult:
    """Greedy backward elimination per equation, scored by equation BIC.

    At each step the single removal that lowers the BIC the most is applied;
    the loop stops when no removal strictly improves it (ties keep the
    regressor). Removing everything is allowed, leaving a zero equation.
    """
    _check_centered(panel)
    design = stack(panel, p)
    _ols_gram(design)  # rank and size checks
    x0, resp = design.x0, design.response
    n, k_full = x0.shape
    out = np.zeros((k_full, design.q))
    for i in range(design.q):
        y = resp[:, i]
        keep = list(range(k_full))
        coef, rss = _ols_rss(x0[:, keep], y)
        bic = _equation_bic(rss, n, len(keep))
        while keep:
            best_j = -1
            best_bic = bic
            best_fit = None
            for j in range(len(keep)):
                cand = keep[:j] + keep[j + 1:]
                if cand:
                    c, r = _ols_rss(x0[:, cand], y)
                else:
                    c, r = np.zeros(0), float(y @ y)
                cand_bic = _equation_bic(r, n, len(cand))
                if cand_bic < best_bic:
                    best_bic = cand_bic
                    best_j = j
                    best_fit = c
            if best_j < 0:
                break
            del keep[best_j]
            bic = best_bic
            coef = best_fit
        if keep:
            out[keep, i] = coef
    return _ls_result(design, out, "rlsit")


def _ols_rss(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float]:
    coef, _, _, _ = np.linalg.lstsq(x, y, rcond=None)
    r = y - x @ coef
    return coef, float(r @ r)


def _univariate_ar_variances(panel: TimeSeriesPanel, p: int) -> np.ndarray:
    """Per-series AR(p) OLS residual variances with the usual n - p adjustment."""
    data = panel.data
    big_t, q = data.shape
    n = big_t - p
    if n <= p:
        raise NumericalError(
            f"univariate AR({p}) variance needs more than {2 * p} observations, got {big_t}"
        )
    out = np.empty(q)
    for i in range(q):
        y = data[p:, i]
        x = np.column_stack([data[p - j:big_t - j, i] for j in range(1, p + 1)])
        coef, _, _, _ = np.linalg.lstsq(x, y, rcond=None)
        r = y - x @ coef
        out[i] = float(r @ r) / (n - p)
    if np.any(out <= 0.0):
        raise NumericalError("a univariate AR fit left zero residual variance")
    return out


@dataclass(frozen=True)
class MinnesotaHyper:
    """Shrinkage settings for the fixed-covariance normal prior.

    Prior standard deviation of an own-lag coefficient at lag l is
    tightness / l; a cross coefficient additionally carries the cross weight
    and the ratio of residual scales. The prior mean is zero except the first
    own lag, which gets ``prior_mean``.
    """

    tightness: float = 0.1
    cross_weight: float = 0.5
    prior_mean: float = 0.0

    def __post_init__(self):
        if self.tightness <= 0 or self.cross_weight <= 0:
            raise ValueError("tightness and cross_weight must be positive")


def _minnesota_prior_variance(
    q: int, p: int, eq: int, sig2: np.ndarray, hyper: MinnesotaHyper
) -> np.ndarray:
    """Diagonal prior variance for one equation, lag-major series-minor order."""
    v = np.empty(p * q)
    for j in range(1, p + 1):
        for l in range(q):
            r = (j - 1) * q + l
            if l == eq:
                v[r] = (hyper.tightness / j) ** 2
            else:
                v[r] = (hyper.tightness * hyper.cross_weight / j) ** 2 * (
                    sig2[eq] / sig2[l]
                )
    return v


def minnesota_fit(
    panel: TimeSeriesPanel, p: int, hyper: MinnesotaHyper | None = None
) -> FitResult:
    """Posterior mean under an independent normal prior with fixed diagonal
    error covariance taken from univariate AR(p) fits.

    With the prior variance sent to infinity the posterior mean reduces to
    OLS; sent to zero it collapses onto the prior mean.
    """
    hyper = hyper or MinnesotaHyper()
    _check_centered(panel)
    design = stack(panel, p)
    sig2 = _univariate_ar_variances(panel, p)
    x0, resp = design.x0, design.response
    gram = x0.T @ x0
    q = design.q
    bmat = np.empty((p * q, q))
    for i in range(q):
        v = _minnesota_prior_variance(q, p, i, sig2, hyper)
        mean = np.zeros(p * q)
        mean[i] = hyper.prior_mean  # first own lag sits at position i
        a = gram / sig2[i] + np.diag(1.0 / v)
        rhs = x0.T @ resp[:, i] / sig2[i] + mean / v
        bmat[:, i] = scipy.linalg.solve(a, rhs, assume_a="pos", check_finite=False)
    coefs = VarCoefficients.from_matrix_stack(bmat, p)
    return FitResult(
        coefficients=coefs,
        error=ErrorModel.from_sigma(np.diag(sig2)),
        method="minnesota",
        p=p,
        lam1=None,
        lam2=None,
        bic=float("nan"),
        objective_trace=(),
        converged=True,
    )


@dataclass(frozen=True)
class NiwHyper:
    """Settings for the conjugate matrix-normal inverse-Wishart prior.

    The coefficient prior is centered at zero (except the first own lag at
    ``prior_mean``) with row covariance built from the same per-lag shrinkage
    grid as the Minnesota prior, scaled by the inverse residual variances so
    that the Kronecker structure reproduces Minnesota-style cross shrinkage.
    The scale matrix is diag of the AR residual variances and the degrees of
    freedom are q + 2, making the prior mean of the error covariance equal to
    that diagonal.
    """

    tightness: float = 0.1
    prior_mean: float = 0.0

    def __post_init__(self):
        if self.tightness <= 0:
            raise ValueError("tightness must be positive")


def niw_fit(panel: TimeSeriesPanel, p: int, hyper: NiwHyper | None = None) -> FitResult:
    """Posterior means under the conjugate matrix-normal inverse-Wishart prior."""
    hyper = hyper or NiwHyper()
    _check_centered(panel)
    design = stack(panel, p)
    sig2 = _univariate_ar_variances(panel, p)
    x0, resp = design.x0, design.response
    n, q = design.n, design.q
    # row prior variance per (lag j, series l): (tightness / j)^2 / sig2_l
    omega0 = np.empty(p * q)
    for j in range(1, p + 1):
        omega0[(j - 1) * q:j * q] = (hyper.tightness / j) ** 2 / sig2
    k0 = np.diag(1.0 / omega0)
    b0 = np.zeros((p * q, q))
    for i in range(q):
        b0[i, i] = hyper.prior_mean
    gram = x0.T @ x0
    kn = k0 + gram
    rhs = k0 @ b0 + x0.T @ resp
    bbar = scipy.linalg.solve(kn, rhs, assume_a="pos", check_finite=False)
    nu0 = q + 2
    s0 = np.diag(sig2)
    yty = resp.T @ resp
    sn = s0 + yty + b0.T @ k0 @ b0 - bbar.T @ kn @ bbar
    sn = (sn + sn.T) / 2.0
    denom = nu0 + n - q - 1
    sigma = sn / denom
    coefs = VarCoefficients.from_matrix_stack(bbar, p)
    return FitResult(
        coefficients=coefs,
        error=ErrorModel.from_sigma(sigma),
        method="niw",
        p=p,
        lam1=None,
        lam2=None,
        bic=float("nan"),
        objective_trace=(),
        converged=True,
    )
