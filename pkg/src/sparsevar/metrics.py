"""Accuracy metrics and significance tests for the estimation and forecast studies.

Estimation accuracy is judged by the mean absolute estimation error over all
coefficients and replications, sparsity recovery by true positive/negative
rates on exact-zero patterns, and forecast accuracy by the mean absolute
forecast error. Pairwise comparisons use a paired t-test on per-run errors,
the Diebold-Mariano test on forecast-error series, and Kendall's coefficient
of concordance for agreement between rankings.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.stats

from .model import VarCoefficients

__all__ = [
    "maee",
    "true_positive_rate",
    "true_negative_rate",
    "mafe",
    "paired_t",
    "diebold_mariano",
    "kendall_w",
    "MetricReport",
]


def _stack_vectors(estimates, truth: VarCoefficients) -> np.ndarray:
    if not estimates:
        raise ValueError("need at least one estimate")
    rows = []
    for est in estimates:
        if (est.p, est.q) != (truth.p, truth.q):
            raise ValueError(
                f"estimate shape (p={est.p}, q={est.q}) does not match truth "
                f"(p={truth.p}, q={truth.q})"
            )
        rows.append(est.vector())
    return np.stack(rows)


def maee(estimates, truth: VarCoefficients) -> float:
    """Mean absolute estimation error over replications and all coefficients."""
    mat = _stack_vectors(estimates, truth)
    return float(np.mean(np.abs(mat - truth.vector())))


def true_positive_rate(estimates, truth: VarCoefficients) -> float:
    """Share of truly nonzero coefficients estimated nonzero (exact-zero test)."""
    mat = _stack_vectors(estimates, truth)
    nz = truth.vector() != 0.0
    if not np.any(nz):
        raise ValueError("truth has no nonzero coefficients; TPR is undefined")
    return float(np.mean(mat[:, nz] != 0.0))


def true_negative_rate(estimates, truth: VarCoefficients) -> float:
    """Share of truly zero coefficients estimated exactly zero."""
    mat = _stack_vectors(estimates, truth)
    z = truth.vector() == 0.0
    if not np.any(z):
        raise ValueError("truth has no zero coefficients; TNR is undefined")
    return float(np.mean(mat[:, z] == 0.0))


def mafe(forecasts: np.ndarray, actuals: np.ndarray) -> float:
    """Mean absolute forecast error over origins and series."""
    forecasts = np.asarray(forecasts, dtype=np.float64)
    actuals = np.asarray(actuals, dtype=np.float64)
    if forecasts.shape != actuals.shape or forecasts.ndim != 2:
        raise ValueError(
            f"forecasts {forecasts.shape} and actuals {actuals.shape} must be "
            "equal-shape 2-d arrays"
        )
    return float(np.mean(np.abs(forecasts - actuals)))


def paired_t(a, b) -> float:
    """Two-sided paired t-test p-value on per-run scalar errors.

    Degenerate inputs short-circuit: identical samples give p = 1, a constant
    nonzero difference gives p = 0.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired samples must be equal-length vectors")
    if a.size < 2:
        raise ValueError("need at least two pairs")
    d = a - b
    if np.all(d == d[0]):
        return 1.0 if d[0] == 0.0 else 0.0
    return float(scipy.stats.ttest_rel(a, b).pvalue)


def diebold_mariano(errors_a, errors_b, h: int = 1) -> tuple[float, float]:
    """Diebold-Mariano comparison of two aligned forecast-error series.

    The loss differential is d_t = |e_a,t| - |e_b,t|. Its long-run variance
    uses the rectangular window, summing autocovariances up to lag h-1. The
    statistic is asymptotically standard normal; swapping the inputs flips its
    sign exactly. Zero-variance differentials short-circuit as in
    :func:`paired_t`.
    """
    ea = np.asarray(errors_a, dtype=np.float64)
    eb = np.asarray(errors_b, dtype=np.float64)
    if ea.shape != eb.shape or ea.ndim != 1:
        raise ValueError("error series must be equal-length vectors")
    t = ea.size
    if t < 10:
        raise ValueError("need at least ten forecast errors for the asymptotic test")
    if h < 1:
        raise ValueError(f"forecast horizon must be at least 1, got {h}")
    d = np.abs(ea) - np.abs(eb)
    dbar = float(d.mean())
    dc = d - dbar
    lrv = float(dc @ dc) / t
    for k in range(1, min(h, t)):
        gamma = float(dc[:-k] @ dc[k:]) / t
        lrv += 2.0 * gamma
    if lrv <= 0.0:
        if abs(dbar) < 1e-300:
            return 0.0, 1.0
        return float(np.sign(dbar) * np.inf), 0.0
    stat = dbar / np.sqrt(lrv / t)
    pvalue = 2.0 * float(scipy.stats.norm.sf(abs(stat)))
    return float(stat), pvalue


def kendall_w(rankings) -> tuple[float, float]:
    """Kendall's coefficient of concordance with tie correction.

    ``rankings`` is an m x n array of scores, one row per judge; each row is
    converted to ranks (average ranks on ties). Returns (W, p) where the
    p-value comes from the chi-square approximation with n - 1 degrees of
    freedom. All-tied rows in every judge leave W undefined and raise.
    """
    scores = np.asarray(rankings, dtype=np.float64)
    if scores.ndim != 2:
        raise ValueError(f"rankings must be 2-d (judges x items), got {scores.shape}")
    m, n = scores.shape
    if m < 2 or n < 3:
        raise ValueError("need at least two judges and three items")
    ranks = np.stack([scipy.stats.rankdata(row) for row in scores])
    totals = ranks.sum(axis=0)
    s = float(np.sum((totals - totals.mean()) ** 2))
    tie_term = 0.0
    for row in ranks:
        _, counts = np.unique(row, return_counts=True)
        tie_term += float(np.sum(counts ** 3 - counts))
    denom = m * m * (n ** 3 - n) - m * tie_term
    if denom <= 0.0:
        raise ValueError("every judge ranked all items equal; W is undefined")
    w = 12.0 * s / denom
    chi2 = m * (n - 1) * w
    pvalue = float(scipy.stats.chi2.sf(chi2, n - 1))
    return float(w), pvalue


_METRIC_COLUMNS = ("maee", "maee_se", "tpr", "tnr", "mafe", "mafe_se")


@dataclass(frozen=True)
class MetricReport:
    """Per-method metric table with Monte Carlo standard errors and pairwise tests.

    ``rows`` maps method name to a metric dict over ``maee``, ``maee_se``,
    ``tpr``, ``tnr``, ``mafe``, ``mafe_se`` (NaN where not computed).
    ``pairwise`` maps (method_a, method_b) to a dict with the paired-t p-value
    on per-run estimation errors and the Diebold-Mariano p-value on forecast
    errors.
    """

    methods: tuple[str, ...]
    rows: dict
    pairwise: dict

    def to_csv(self, path) -> None:
        """Method-by-metric table, one row per method."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["method", *_METRIC_COLUMNS])
            for name in self.methods:
                row = self.rows[name]
                writer.writerow(
                    [name] + [repr(float(row.get(c, float("nan")))) for c in _METRIC_COLUMNS]
                )

    def pairwise_to_csv(self, path) -> None:
        """Pairwise significance table: one row per ordered method pair."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["method_a", "method_b", "maee_paired_t_p", "mafe_dm_p"])
            for (a, b) in sorted(self.pairwise):
                cell = self.pairwise[(a, b)]
                writer.writerow([
                    a,
                    b,
                    repr(float(cell.get("maee_p", float("nan")))),
                    repr(float(cell.get("mafe_p", float("nan")))),
                ])

    def format_table(self) -> str:
        """Fixed-width text rendering of the main table."""
        header = f"{'method':<12}" + "".join(f"{c:>12}" for c in _METRIC_COLUMNS)
        lines = [header, "-" * len(header)]
        for name in self.methods:
            row = self.rows[name]
            cells = "".join(
                f"{row.get(c, float('nan')):>12.4f}" for c in _METRIC_COLUMNS
            )
            lines.append(f"{name:<12}" + cells)
        return "\n".join(lines)
