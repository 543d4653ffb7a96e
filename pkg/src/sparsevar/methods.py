"""Name-keyed dispatch over every estimator in the package.

The rolling forecaster, the bootstrap, the experiment harness, and the CLI all
select estimators by these short names.
"""

from __future__ import annotations

from .benchmarks import (
    ls_fit,
    minnesota_fit,
    niw_fit,
    restricted_ls_1step,
    restricted_ls_iterative,
)
from .estimator import FitConfig, FitResult, select_lambdas, select_p
from .model import TimeSeriesPanel

__all__ = ["METHOD_NAMES", "fit_method"]

METHOD_NAMES = ("sparse", "ls", "rls1", "rlsit", "minnesota", "niw")


def fit_method(
    name: str,
    panel: TimeSeriesPanel,
    p: int | None,
    config: FitConfig | None = None,
) -> FitResult:
    """Fit a centered panel with the named estimator.

    ``p`` may be None only for the sparse method, which then chooses the lag
    order by BIC over ``config.p_candidates``.
    """
    if name not in METHOD_NAMES:
        raise ValueError(f"unknown method {name!r}; choose from {METHOD_NAMES}")
    if name == "sparse":
        if p is None:
            return select_p(panel, config)
        return select_lambdas(panel, p, config)
    if p is None:
        raise ValueError(f"method {name!r} requires an explicit lag order")
    if name == "ls":
        return ls_fit(panel, p)
    if name == "rls1":
        return restricted_ls_1step(panel, p)
    if name == "rlsit":
        return restricted_ls_iterative(panel, p)
    if name == "minnesota":
        return minnesota_fit(panel, p)
    return niw_fit(panel, p)
