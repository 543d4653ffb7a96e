"""Application layer: CSV ingestion, transforms, rolling forecasts, network
extraction, experiment orchestration, and the command line interface."""

from .data import (
    PanelSource,
    TransformPlan,
    ingest,
    ingest_stores,
    invert_transform,
    read_panel_csv,
    transform,
)
from .experiment import ExperimentConfig, bundled_config, load_config, run_experiment
from .forecast import RollingForecastResult, rolling_forecast
from .network import EdgeList, extract_network, store_degree_matrices

__all__ = [
    "PanelSource",
    "TransformPlan",
    "ingest",
    "ingest_stores",
    "read_panel_csv",
    "transform",
    "invert_transform",
    "rolling_forecast",
    "RollingForecastResult",
    "extract_network",
    "EdgeList",
    "store_degree_matrices",
    "ExperimentConfig",
    "load_config",
    "bundled_config",
    "run_experiment",
]
