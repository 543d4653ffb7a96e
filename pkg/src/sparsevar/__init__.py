"""Sparse penalized-likelihood estimation for vector autoregressions.

The estimator alternates a group-lasso update of the autoregressive
coefficients (grouping the lags of one predictor within one equation, so a
predictor is kept or dropped as a whole) with a graphical-lasso update of the
error precision matrix, and picks both penalties and the lag order by BIC.
Least-squares, restricted least-squares, and two Bayesian shrinkage baselines
are included, along with generalized impulse responses with bootstrap bands,
rolling forecast evaluation, and a Monte Carlo benchmarking harness.
"""

from .benchmarks import (
    MinnesotaHyper,
    NiwHyper,
    ls_fit,
    minnesota_fit,
    niw_fit,
    restricted_ls_1step,
    restricted_ls_iterative,
)
from .estimator import FitConfig, FitResult, alternate_fit, select_lambdas, select_p
from .exceptions import DataError, NumericalError
from .glasso import residual_covariance, solve_glasso
from .grouplasso import lambda1_max, solve_group_lasso, whiten
from .irf import BootstrapBands, GirfResult, bootstrap_bands, effect_size, girf
from .methods import METHOD_NAMES, fit_method
from .metrics import (
    MetricReport,
    diebold_mariano,
    kendall_w,
    maee,
    mafe,
    paired_t,
    true_negative_rate,
    true_positive_rate,
)
from .model import (
    ErrorModel,
    TimeSeriesPanel,
    VarCoefficients,
    companion_matrix,
    forecast_one_step,
    simulate_var,
    stability_check,
    stack,
)

__version__ = "0.1.0"

__all__ = [
    "TimeSeriesPanel",
    "VarCoefficients",
    "ErrorModel",
    "stack",
    "simulate_var",
    "forecast_one_step",
    "companion_matrix",
    "stability_check",
    "whiten",
    "solve_group_lasso",
    "lambda1_max",
    "solve_glasso",
    "residual_covariance",
    "FitConfig",
    "FitResult",
    "alternate_fit",
    "select_lambdas",
    "select_p",
    "ls_fit",
    "restricted_ls_1step",
    "restricted_ls_iterative",
    "minnesota_fit",
    "niw_fit",
    "MinnesotaHyper",
    "NiwHyper",
    "METHOD_NAMES",
    "fit_method",
    "girf",
    "effect_size",
    "bootstrap_bands",
    "GirfResult",
    "BootstrapBands",
    "maee",
    "mafe",
    "true_positive_rate",
    "true_negative_rate",
    "paired_t",
    "diebold_mariano",
    "kendall_w",
    "MetricReport",
    "DataError",
    "NumericalError",
    "__version__",
]
