"""Penalized precision estimation: the graphical lasso with unpenalized diagonal.

Given a residual covariance S, solve

    min_Omega  trace(S Omega) - log det Omega + lambda2 * sum_{k != k'} |Omega_{kk'}|

by blockwise coordinate descent over rows/columns, where each column step is a
lasso regression against the current working covariance. Only off-diagonal
entries are penalized, so the fitted covariance matches S on the diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numba import njit

from .exceptions import NumericalError
from .model import StackedDesign, VarCoefficients, _spd_inverse

__all__ = [
    "GlassoResult",
    "residual_covariance",
    "lambda2_max",
    "solve_glasso",
    "glasso_kkt_violation",
]


def residual_covariance(design: StackedDesign, coefficients: VarCoefficients) -> np.ndarray:
    """S = E'E / n from the n x q residual matrix at the given coefficients."""
    if coefficients.q != design.q or coefficients.p != design.p:
        raise ValueError(
            f"coefficients (p={coefficients.p}, q={coefficients.q}) do not match "
            f"design (p={design.p}, q={design.q})"
        )
    e = design.residual_matrix(coefficients)
    s = e.T @ e / design.n
    return (s + s.T) / 2.0


def lambda2_max(s: np.ndarray) -> float:
    """Largest absolute off-diagonal of S: at or above it the solution is diagonal."""
    s = np.asarray(s)
    if s.shape[0] == 1:
        return 0.0
    off = s - np.diag(np.diag(s))
    return float(np.max(np.abs(off)))


@dataclass(frozen=True)
class GlassoResult:
    """Estimated precision (omega), its inverse (sigma), and solve diagnostics."""

    omega: np.ndarray
    sigma: np.ndarray
    converged: bool
    n_cycles: int
    kkt_violation: float
    objective_path: tuple = ()


def glasso_objective(s: np.ndarray, omega: np.ndarray, lam2: float) -> float:
    """trace(S omega) - log|omega| plus the off-diagonal L1 penalty."""
    sign, logdet = np.linalg.slogdet(omega)
    if sign <= 0:
        return np.inf
    off = np.abs(omega).sum() - np.abs(np.diag(omega)).sum()
    return float(np.trace(s @ omega)) - logdet + lam2 * off


@njit(cache=True)
def _lasso_cd(w11, s12, b, lam, tol, max_iter):
    """min_b 0.5 b'W11 b - s12'b + lam ||b||_1 by coordinate descent, in place."""
    m = b.shape[0]
    for _ in range(max_iter):
        maxd = 0.0
        for k in range(m):
            r = s12[k]
            for l in range(m):
                if l != k:
                    r -= w11[k, l] * b[l]
            old = b[k]
            if r > lam:
                new = (r - lam) / w11[k, k]
            elif r < -lam:
                new = (r + lam) / w11[k, k]
            else:
                new = 0.0
            if new != old:
                b[k] = new
                d = abs(new - old)
                if d > maxd:
                    maxd = d
        if maxd < tol:
            break
    return maxd


def glasso_kkt_violation(s: np.ndarray, omega: np.ndarray, lam2: float) -> float:
    """Worst entrywise violation of the stationarity conditions at ``omega``.

    With W = inverse of omega: diagonal entries need S_kk = W_kk; nonzero
    off-diagonals need S - W + lambda2 * sign(omega) = 0; zero off-diagonals
    need |S - W| <= lambda2.
    """
    w = _spd_inverse(omega, "estimated precision")
    diff = s - w
    q = s.shape[0]
    worst = float(np.max(np.abs(np.diag(diff))))
    if q > 1:
        off = ~np.eye(q, dtype=bool)
        nz = off & (omega != 0.0)
        z = off & (omega == 0.0)
        if np.any(nz):
            worst = max(worst, float(np.max(np.abs(diff[nz] + lam2 * np.sign(omega[nz])))))
        if np.any(z):
            worst = max(worst, float(max(np.max(np.abs(diff[z])) - lam2, 0.0)))
    return worst


def _finalize(omega, sigma, converged, cycles, s, lam2, path=()) -> GlassoResult:
    omega = (omega + omega.T) / 2.0
    eigmin = float(scipy.linalg.eigvalsh(omega)[0])
    if eigmin <= 0.0:
        raise NumericalError(
            f"estimated precision lost positive definiteness (min eigenvalue {eigmin:.3e})"
        )
    kkt = glasso_kkt_violation(s, omega, lam2)
    omega.flags.writeable = False
    if sigma is None:
        # the working covariance only matches inv(omega) up to the outer
        # tolerance; report the exact inverse of what we actually return
        sigma = _spd_inverse(omega, "precision")
    sigma = np.array(sigma, copy=True)
    sigma.flags.writeable = False
    return GlassoResult(omega, sigma, converged, cycles, kkt, tuple(path))


def solve_glasso(
    s: np.ndarray,
    lam2: float,
    tol: float = 1e-6,
    inner_tol: float = 1e-7,
    max_cycles: int = 500,
    inner_max_iter: int = 1000,
    track_objective: bool = False,
) -> GlassoResult:
    """Estimate a sparse precision matrix from a covariance estimate.

    Parameters
    ----------
    s : ndarray
        Symmetric q x q covariance with strictly positive diagonal.
    lam2 : float
        Nonnegative off-diagonal penalty. Zero requires s to be positive
        definite (the estimate is then the plain inverse).
    tol : float
        Outer stopping rule: largest entry change of the precision between
        full cycles.
    inner_tol : float
        Coordinate-descent tolerance of each column's lasso step.
    """
    s = np.asarray(s, dtype=np.float64)
    q = s.shape[0]
    if s.ndim != 2 or s.shape != (q, q):
        raise ValueError(f"covariance must be square, got shape {s.shape}")
    if not np.all(np.isfinite(s)):
        raise ValueError("covariance contains non-finite values")
    if not np.allclose(s, s.T, atol=1e-10):
        raise ValueError("covariance must be symmetric")
    if np.any(np.diag(s) <= 0.0):
        k = int(np.argmin(np.diag(s)))
        raise NumericalError(f"covariance diagonal entry {k} is not positive")
    if lam2 < 0:
        raise ValueError(f"lambda2 must be nonnegative, got {lam2}")

    if q == 1:
        omega = np.array([[1.0 / s[0, 0]]])
        return _finalize(omega, s.copy(), True, 0, s, lam2)

    if lam2 == 0.0:
        eigmin = float(scipy.linalg.eigvalsh(s)[0])
        if eigmin <= 0.0:
            raise NumericalError(
                "covariance is singular and the off-diagonal penalty is zero; "
                f"a positive lambda2 is required (min eigenvalue {eigmin:.3e})"
            )
        omega = _spd_inverse(s, "covariance")
        return _finalize(omega, s.copy(), True, 0, s, lam2)

    if lam2 >= lambda2_max(s):
        # every off-diagonal satisfies its zero condition outright, so the
        # exact solution is diagonal
        omega = np.diag(1.0 / np.diag(s))
        return _finalize(omega, np.diag(np.diag(s)), True, 0, s, lam2)

    w = s.copy()
    omega = np.diag(1.0 / np.diag(s))
    bcols = np.zeros((q, q - 1))
    converged = False
    cycles = 0
    objective_path = []
    idx_cache = [np.array([m for m in range(q) if m != j]) for j in range(q)]
    while cycles < max_cycles:
        omega_prev = omega.copy()
        for j in range(q):
            idx = idx_cache[j]
            w11 = np.ascontiguousarray(w[np.ix_(idx, idx)])
            s12 = np.ascontiguousarray(s[idx, j])
            b = bcols[j]
            _lasso_cd(w11, s12, b, float(lam2), float(inner_tol), int(inner_max_iter))
            w12 = w11 @ b
            w[idx, j] = w12
            w[j, idx] = w12
            denom = s[j, j] - float(w12 @ b)
            if denom <= 0.0:
                raise NumericalError(
                    "working covariance lost positive definiteness during the "
                    f"column update for series {j}"
                )
            o_jj = 1.0 / denom
            omega[j, j] = o_jj
            omega[idx, j] = -b * o_jj
            omega[j, idx] = -b * o_jj
        cycles += 1
        if track_objective:
            objective_path.append(glasso_objective(s, omega, lam2))
        if float(np.max(np.abs(omega - omega_prev))) < tol:
            converged = True
            break
    return _finalize(omega, None, converged, cycles, s, lam2, objective_path)
