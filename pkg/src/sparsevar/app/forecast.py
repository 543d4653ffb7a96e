"""Rolling-window one-step-ahead forecasting over a fixed evaluation span."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import NumericalError
from ..methods import fit_method
from ..metrics import mafe
from ..model import TimeSeriesPanel, forecast_one_step

__all__ = ["RollingForecastResult", "rolling_forecast"]


@dataclass(frozen=True)
class RollingForecastResult:
    """Forecasts and outcomes collected over the rolling origins.

    Row k corresponds to origin ``origins[k]``: the model was fit on the
    ``window`` observations ending at that index (exclusive) and predicted the
    observation at that index. Origins whose fit failed are listed in
    ``failures`` and carry no row.
    """

    method: str
    window: int
    origins: tuple
    forecasts: np.ndarray
    actuals: np.ndarray
    failures: tuple

    def errors(self) -> np.ndarray:
        return self.forecasts - self.actuals

    def mafe(self) -> float:
        return mafe(self.forecasts, self.actuals)


def rolling_forecast(
    panel: TimeSeriesPanel,
    method: str,
    window: int,
    p=None,
    end=None,
    config=None,
) -> RollingForecastResult:
    """Fit on each trailing window and forecast the next observation.

    Origins run over t = window .. end-1. Each fit sees only the window ending
    at t; the window is centered, the model fit by ``method``, and the one-step
    forecast shifted back to the data scale. Fits that fail numerically are
    skipped and recorded.
    """
    if end is None:
        end = panel.n_obs
    if not isinstance(end, (int, np.integer)):
        raise ValueError(f"end must be an integer, got {end!r}")
    if end > panel.n_obs:
        raise ValueError(f"end {end} exceeds panel length {panel.n_obs}")
    if not isinstance(window, (int, np.integer)) or window < 2:
        raise ValueError(f"window must be an integer of at least 2, got {window!r}")
    if window >= end:
        raise ValueError(f"window {window} leaves no origins before end {end}")
    if p is not None and window <= p:
        raise ValueError(f"window {window} is too short for {p} lags")
    origins = []
    forecasts = []
    actuals = []
    failures = []
    for t in range(window, end):
        segment = TimeSeriesPanel(panel.data[t - window : t], names=panel.names)
        centered = segment.center()
        try:
            fit = fit_method(method, centered, p, config=config)
            ahead = forecast_one_step(fit.coefficients, centered.data)
        except (NumericalError, np.linalg.LinAlgError):
            failures.append(t)
            continue
        origins.append(t)
        forecasts.append(ahead + centered.means)
        actuals.append(panel.data[t])
    if forecasts:
        fmat = np.stack(forecasts)
        amat = np.stack(actuals)
    else:
        fmat = np.empty((0, panel.n_series))
        amat = np.empty((0, panel.n_series))
    return RollingForecastResult(
        method=method,
        window=int(window),
        origins=tuple(origins),
        forecasts=fmat,
        actuals=amat,
        failures=tuple(failures),
    )
