"""Config-driven Monte Carlo studies: simulate, fit every method, score, report.

A study is described by a JSON config naming a simulation design, the sample
length, the number of replications, the candidate methods, and optionally a
rolling forecast protocol and an impulse-response horizon. Running it produces
CSV artifacts plus a text table; everything is a pure function of (config,
seed), so reruns are byte-identical.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import resources
from itertools import combinations
from pathlib import Path

import numpy as np

from ..exceptions import DataError, NumericalError
from ..irf import girf, girf_to_csv, worker_count
from ..methods import METHOD_NAMES, fit_method
from ..metrics import MetricReport, diebold_mariano, paired_t
from ..model import ErrorModel, TimeSeriesPanel, VarCoefficients, simulate_var
from .forecast import rolling_forecast

__all__ = [
    "leader_block_design",
    "diagonal_design",
    "white_noise_design",
    "DESIGNS",
    "build_design",
    "RollingSpec",
    "ExperimentConfig",
    "load_config",
    "bundled_config",
    "run_experiment",
]


def leader_block_design():
    """Ten series in two blocks of five; within each block every series loads
    on itself and on the block's first series, at 0.4 (lag 1) and 0.2 (lag 2)."""
    q = 10
    b1 = np.zeros((q, q))
    b2 = np.zeros((q, q))
    for start in (0, 5):
        for i in range(5):
            b1[start + i, start + i] = 0.4
            b2[start + i, start + i] = 0.2
        for i in range(1, 5):
            b1[start + i, start] = 0.4
            b2[start + i, start] = 0.2
    coefficients = VarCoefficients(np.stack([b1, b2]))
    error = ErrorModel.from_sigma(0.1 * np.eye(q))
    return coefficients, error


def diagonal_design(series: int = 2, coefficient: float = 0.5, noise_variance: float = 1.0):
    """First-order model with a common diagonal coefficient and white errors."""
    if not isinstance(series, int) or series < 1:
        raise ValueError(f"series must be a positive integer, got {series!r}")
    if not abs(coefficient) < 1.0:
        raise ValueError(f"diagonal coefficient must satisfy |b| < 1, got {coefficient!r}")
    if not noise_variance > 0.0:
        raise ValueError(f"noise variance must be positive, got {noise_variance!r}")
    q = series
    coefficients = VarCoefficients(coefficient * np.eye(q)[None, :, :])
    error = ErrorModel.from_sigma(noise_variance * np.eye(q))
    return coefficients, error


def white_noise_design(series: int = 5, lags: int = 1):
    """All autoregressive coefficients zero; pure noise with unit covariance."""
    if not isinstance(series, int) or series < 1:
        raise ValueError(f"series must be a positive integer, got {series!r}")
    if not isinstance(lags, int) or lags < 1:
        raise ValueError(f"lags must be a positive integer, got {lags!r}")
    coefficients = VarCoefficients(np.zeros((lags, series, series)))
    error = ErrorModel.from_sigma(np.eye(series))
    return coefficients, error


DESIGNS = {
    "leader_block": leader_block_design,
    "diagonal": diagonal_design,
    "white_noise": white_noise_design,
}

_DESIGN_KEYS = {
    "leader_block": set(),
    "diagonal": {"series", "coefficient", "noise_variance"},
    "white_noise": {"series", "lags"},
}


def build_design(spec, where: str = "design"):
    """Instantiate (coefficients, error) from a design mapping."""
    if not isinstance(spec, dict):
        raise DataError(f"{where}: must be an object, got {type(spec).__name__}")
    if "name" not in spec:
        raise DataError(f"{where}.name: required")
    name = spec["name"]
    if name not in DESIGNS:
        raise DataError(
            f"{where}.name: unknown design {name!r}; "
            f"expected one of {', '.join(sorted(DESIGNS))}"
        )
    extras = {k: v for k, v in spec.items() if k != "name"}
    allowed = _DESIGN_KEYS[name]
    for key in extras:
        if key not in allowed:
            raise DataError(f"{where}.{key}: not a parameter of design {name!r}")
    try:
        return DESIGNS[name](**extras)
    except (TypeError, ValueError) as exc:
        raise DataError(f"{where}: {exc}") from exc


@dataclass(frozen=True)
class RollingSpec:
    length: int
    window: int


@dataclass(frozen=True)
class ExperimentConfig:
    design: dict
    length: int
    runs: int
    lags: object
    methods: tuple
    rolling: RollingSpec | None
    girf_horizon: int
    seed: int

    @classmethod
    def from_mapping(cls, obj, where: str = "config") -> "ExperimentConfig":
        if not isinstance(obj, dict):
            raise DataError(f"{where}: must be an object, got {type(obj).__name__}")
        known = {
            "design",
            "length",
            "runs",
            "lags",
            "methods",
            "rolling",
            "girf_horizon",
            "seed",
        }
        for key in obj:
            if key not in known:
                raise DataError(f"{where}.{key}: unknown key")
        for key in ("design", "length", "runs", "lags", "methods"):
            if key not in obj:
                raise DataError(f"{where}.{key}: required")
        build_design(obj["design"], where=f"{where}.design")

        length = _expect_int(obj["length"], f"{where}.length", minimum=2)
        runs = _expect_int(obj["runs"], f"{where}.runs", minimum=1)

        lags = obj["lags"]
        if lags == "auto":
            pass
        elif isinstance(lags, int) and not isinstance(lags, bool):
            if lags < 1:
                raise DataError(f"{where}.lags: must be positive, got {lags}")
            if lags >= length:
                raise DataError(
                    f"{where}.lags: {lags} lags need more than {length} observations"
                )
        else:
            raise DataError(f"{where}.lags: must be a positive integer or \"auto\"")

        methods = obj["methods"]
        if not isinstance(methods, list) or not methods:
            raise DataError(f"{where}.methods: must be a non-empty list")
        for i, m in enumerate(methods):
            if m not in METHOD_NAMES:
                raise DataError(
                    f"{where}.methods[{i}]: unknown method {m!r}; "
                    f"expected one of {', '.join(METHOD_NAMES)}"
                )
        if len(set(methods)) != len(methods):
            raise DataError(f"{where}.methods: duplicate entries")
        if lags == "auto" and set(methods) != {"sparse"}:
            raise DataError(
                f"{where}.lags: \"auto\" selects the order only for the sparse method; "
                "fix an integer lag order when benchmarks are included"
            )

        rolling = None
        if obj.get("rolling") is not None:
            rspec = obj["rolling"]
            if not isinstance(rspec, dict):
                raise DataError(f"{where}.rolling: must be an object or null")
            for key in rspec:
                if key not in {"length", "window"}:
                    raise DataError(f"{where}.rolling.{key}: unknown key")
            for key in ("length", "window"):
                if key not in rspec:
                    raise DataError(f"{where}.rolling.{key}: required")
            rlength = _expect_int(rspec["length"], f"{where}.rolling.length", minimum=3)
            rwindow = _expect_int(rspec["window"], f"{where}.rolling.window", minimum=2)
            if rwindow >= rlength:
                raise DataError(
                    f"{where}.rolling.window: window {rwindow} leaves no "
                    f"forecast origins before length {rlength}"
                )
            if isinstance(lags, int) and rwindow <= lags:
                raise DataError(
                    f"{where}.rolling.window: window {rwindow} is too short "
                    f"for {lags} lags"
                )
            rolling = RollingSpec(length=rlength, window=rwindow)

        girf_horizon = _expect_int(
            obj.get("girf_horizon", 0), f"{where}.girf_horizon", minimum=0
        )
        seed = _expect_int(obj.get("seed", 0), f"{where}.seed", minimum=0)
        return cls(
            design=dict(obj["design"]),
            length=length,
            runs=runs,
            lags=lags,
            methods=tuple(methods),
            rolling=rolling,
            girf_horizon=girf_horizon,
            seed=seed,
        )


def _expect_int(value, where: str, minimum: int) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise DataError(f"{where}: must be an integer, got {value!r}")
    if value < minimum:
        raise DataError(f"{where}: must be at least {minimum}, got {value}")
    return value


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from exc
    return ExperimentConfig.from_mapping(obj)


def bundled_config(name: str = "table1") -> ExperimentConfig:
    """Load a config shipped with the package (currently just ``table1``)."""
    resource = resources.files("sparsevar.app").joinpath(f"configs/{name}.json")
    try:
        text = resource.read_text()
    except FileNotFoundError:
        raise DataError(f"no bundled config named {name!r}") from None
    return ExperimentConfig.from_mapping(json.loads(text))


def _fit_lags(config: ExperimentConfig):
    return None if config.lags == "auto" else int(config.lags)


def _estimation_run(task):
    config, s = task
    coefficients, error = build_design(config.design)
    panel = simulate_var(
        coefficients, error, length=config.length, seed=[config.seed, 0, s]
    )
    centered = panel.center()
    p = _fit_lags(config)
    return {name: fit_method(name, centered, p) for name in config.methods}


def _rolling_run(task):
    config, s = task
    coefficients, error = build_design(config.design)
    panel = simulate_var(
        coefficients, error, length=config.rolling.length, seed=[config.seed, 1, s]
    )
    p = _fit_lags(config)
    out = {}
    for name in config.methods:
        result = rolling_forecast(panel, name, window=config.rolling.window, p=p)
        errors = {
            origin: result.errors()[i] for i, origin in enumerate(result.origins)
        }
        out[name] = (errors, result.mafe() if result.origins else math.nan,
                     len(result.failures))
    return out


def _map_runs(fn, config: ExperimentConfig):
    tasks = [(config, s) for s in range(config.runs)]
    workers = worker_count()
    if workers == 1 or config.runs == 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, config.runs)) as pool:
        return list(pool.map(fn, tasks))


def _sample_sd(values) -> float:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size < 2:
        return math.nan
    return float(arr.std(ddof=1) / math.sqrt(arr.size))


def run_experiment(config: ExperimentConfig, out_dir) -> MetricReport:
    """Run the full study and write its artifacts under ``out_dir``.

    Emits metrics.csv / metrics.txt (the method-by-metric table), pairwise.csv
    (significance tests), fit_summary.csv (selection diagnostics), and one
    girf_<method>.csv per method when an impulse horizon is configured.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    truth, _ = build_design(config.design)
    truth_vec = truth.vector()

    fits_by_run = _map_runs(_estimation_run, config)
    rolling_by_run = _map_runs(_rolling_run, config) if config.rolling else None

    rows = {}
    maee_runs = {}
    mafe_runs = {}
    summary_rows = []
    for name in config.methods:
        fits = [run[name] for run in fits_by_run]
        errors = [float(np.mean(np.abs(f.coefficients.vector() - truth_vec))) for f in fits]
        maee_runs[name] = errors
        nonzero_truth = truth_vec != 0.0
        if np.any(nonzero_truth):
            tpr = float(
                np.mean([np.mean(f.coefficients.vector()[nonzero_truth] != 0.0) for f in fits])
            )
        else:
            tpr = math.nan
        if np.any(~nonzero_truth):
            tnr = float(
                np.mean([np.mean(f.coefficients.vector()[~nonzero_truth] == 0.0) for f in fits])
            )
        else:
            tnr = math.nan
        mafe_values = []
        rolling_failures = 0
        if rolling_by_run is not None:
            for run in rolling_by_run:
                _, run_mafe, failures = run[name]
                rolling_failures += failures
                if not math.isnan(run_mafe):
                    mafe_values.append(run_mafe)
        mafe_runs[name] = mafe_values
        rows[name] = {
            "maee": float(np.mean(errors)),
            "maee_se": _sample_sd(errors),
            "tpr": tpr,
            "tnr": tnr,
            "mafe": float(np.mean(mafe_values)) if mafe_values else math.nan,
            "mafe_se": _sample_sd(mafe_values) if mafe_values else math.nan,
        }
        lam1s = [f.lam1 for f in fits if f.lam1 is not None]
        lam2s = [f.lam2 for f in fits if f.lam2 is not None]
        summary_rows.append(
            {
                "method": name,
                "runs": config.runs,
                "mean_lags": float(np.mean([f.p for f in fits])),
                "mean_lambda1": float(np.mean(lam1s)) if lam1s else math.nan,
                "mean_lambda2": float(np.mean(lam2s)) if lam2s else math.nan,
                "share_converged": float(np.mean([f.converged for f in fits])),
                "mean_nonzero_coef": float(
                    np.mean([np.count_nonzero(f.coefficients.vector()) for f in fits])
                ),
                "mean_nonzero_precision_offdiag": float(
                    np.mean(
                        [
                            np.count_nonzero(f.error.omega[np.triu_indices(f.q, k=1)])
                            for f in fits
                        ]
                    )
                ),
                "rolling_failures": rolling_failures,
            }
        )

    pairwise = {}
    for a, b in combinations(config.methods, 2):
        try:
            maee_p = paired_t(maee_runs[a], maee_runs[b])
        except ValueError:
            maee_p = math.nan
        mafe_p = math.nan
        if rolling_by_run is not None:
            # One test per replicate on the origin-ordered, cross-series mean
            # absolute error differential; the median p over replicates is the
            # reported comparison.  Pooling replicates into a single series
            # would make the test arbitrarily powerful as runs grow.
            per_run_p = []
            for run in rolling_by_run:
                errors_a, _, _ = run[a]
                errors_b, _, _ = run[b]
                origins = sorted(set(errors_a) & set(errors_b))
                series_a = [float(np.mean(np.abs(errors_a[t]))) for t in origins]
                series_b = [float(np.mean(np.abs(errors_b[t]))) for t in origins]
                try:
                    per_run_p.append(diebold_mariano(series_a, series_b, h=1)[1])
                except ValueError:
                    continue
            if per_run_p:
                mafe_p = float(np.median(per_run_p))
        pairwise[(a, b)] = {"maee_p": maee_p, "mafe_p": mafe_p}

    report = MetricReport(methods=config.methods, rows=rows, pairwise=pairwise)
    report.to_csv(out / "metrics.csv")
    report.pairwise_to_csv(out / "pairwise.csv")
    (out / "metrics.txt").write_text(report.format_table() + "\n")

    fieldnames = list(summary_rows[0])
    with open(out / "fit_summary.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in summary_rows:
            writer.writerow(
                {
                    k: (repr(float(v)) if isinstance(v, float) else v)
                    for k, v in row.items()
                }
            )

    if config.girf_horizon > 0:
        for name in config.methods:
            fit = fits_by_run[0][name]
            try:
                responses = girf(fit, horizon=config.girf_horizon)
            except NumericalError:
                continue
            girf_to_csv(responses, out / f"girf_{name}.csv")
    return report
