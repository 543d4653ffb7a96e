"""Command line front end.

Subcommands cover the full workflow: ``simulate`` writes a synthetic panel,
``fit`` estimates a model and stores it as JSON, ``irf`` turns a stored fit
into impulse-response CSVs (optionally with bootstrap bands), ``forecast``
runs the rolling one-step protocol, ``network`` aggregates several store fits
into a majority-vote graph, and ``bench`` executes a config-driven study.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
All outputs are deterministic functions of the inputs and ``--seed``.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from ..estimator import FitResult
from ..exceptions import DataError, NumericalError
from ..irf import bootstrap_bands, girf, girf_to_csv
from ..methods import METHOD_NAMES, fit_method
from ..model import ErrorModel, TimeSeriesPanel, VarCoefficients, simulate_var
from .data import TransformPlan, invert_transform, read_panel_csv, transform
from .experiment import DESIGNS, build_design, bundled_config, load_config, run_experiment
from .forecast import rolling_forecast
from .network import edges_to_csv, extract_network, write_dot, write_graphml

FIT_SCHEMA = "sparsevar-fit-v1"


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on usage errors; we reserve 2 for data."""

    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


def _lags_arg(text: str):
    if text == "auto":
        return "auto"
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected a positive integer or 'auto', got {text!r}"
        ) from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"lag order must be positive, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sparsevar", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="simulate a panel from a named design")
    sim.add_argument("--design", choices=sorted(DESIGNS), default="leader_block")
    sim.add_argument("--length", type=int, default=100, help="observations to keep")
    sim.add_argument("--series", type=int, default=None, help="series count, where the design allows it")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True, help="output CSV path")

    fit = sub.add_parser("fit", help="estimate a model from a panel CSV")
    fit.add_argument("--data", required=True, help="input panel CSV")
    fit.add_argument("--method", choices=METHOD_NAMES, default="sparse")
    fit.add_argument("--lags", type=_lags_arg, default="auto",
                     help="lag order, or 'auto' (sparse method only)")
    fit.add_argument("--out", required=True, help="output fit JSON path")

    irf_cmd = sub.add_parser("irf", help="impulse responses from a stored fit")
    irf_cmd.add_argument("--fit", required=True, help="fit JSON from the fit command")
    irf_cmd.add_argument("--horizon", type=int, default=10)
    irf_cmd.add_argument("--boot", type=int, default=0,
                         help="bootstrap replicates; 0 for point responses only")
    irf_cmd.add_argument("--data", default=None,
                         help="panel CSV (required with --boot, sets the resample length)")
    irf_cmd.add_argument("--seed", type=int, default=0)
    irf_cmd.add_argument("--out", required=True, help="output CSV path")

    fc = sub.add_parser("forecast", help="rolling one-step-ahead forecasts")
    fc.add_argument("--data", required=True, help="input panel CSV")
    fc.add_argument("--method", choices=METHOD_NAMES, default="sparse")
    fc.add_argument("--lags", type=_lags_arg, default="auto")
    fc.add_argument("--window", type=int, required=True, help="rolling window length")
    fc.add_argument("--end", type=int, default=None,
                    help="stop forecasting at this row (default: panel end)")
    fc.add_argument("--transform", choices=("none", "auto"), default="none",
                    help="'auto' applies suffix rules and reports level forecasts")
    fc.add_argument("--out", required=True, help="output CSV path")

    net = sub.add_parser("network", help="majority-vote category network from store fits")
    net.add_argument("--fits", nargs="+", required=True, help="fit JSON files, one per store")
    net.add_argument("--channel", choices=("price", "promo", "sales"), default="price")
    net.add_argument("--out", required=True,
                     help="output prefix; writes <out>.graphml, <out>.dot, <out>_edges.csv")

    bench = sub.add_parser("bench", help="run a config-driven simulation study")
    bench.add_argument("--config", default=None,
                       help="experiment config JSON (default: bundled table1)")
    bench.add_argument("--seed", type=int, default=None, help="override the config seed")
    bench.add_argument("--out", required=True, help="output directory")

    return parser


def _write_panel_csv(panel: TimeSeriesPanel, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["week", *panel.names])
        for t in range(panel.n_obs):
            writer.writerow([t + 1] + [repr(float(v)) for v in panel.data[t]])


def _load_panel(path) -> TimeSeriesPanel:
    _, names, data = read_panel_csv(path)
    return TimeSeriesPanel(data, names=names)


def _float_or_none(value):
    if value is None:
        return None
    value = float(value)
    return None if math.isnan(value) else value


def save_fit(fit: FitResult, names, means, path) -> None:
    obj = {
        "schema": FIT_SCHEMA,
        "method": fit.method,
        "lags": fit.p,
        "lambda1": _float_or_none(fit.lam1),
        "lambda2": _float_or_none(fit.lam2),
        "bic": _float_or_none(fit.bic),
        "converged": bool(fit.converged),
        "names": list(names),
        "means": [float(m) for m in means],
        "coefficients": fit.coefficients.b.tolist(),
        "sigma": fit.error.sigma.tolist(),
        "omega": fit.error.omega.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_fit(path):
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(obj, dict) or obj.get("schema") != FIT_SCHEMA:
        raise DataError(f"{path}: not a {FIT_SCHEMA} file")
    try:
        coefficients = VarCoefficients(np.asarray(obj["coefficients"], dtype=np.float64))
        error = ErrorModel(
            sigma=np.asarray(obj["sigma"], dtype=np.float64),
            omega=np.asarray(obj["omega"], dtype=np.float64),
        )
        fit = FitResult(
            coefficients=coefficients,
            error=error,
            method=obj["method"],
            p=int(obj["lags"]),
            lam1=obj.get("lambda1"),
            lam2=obj.get("lambda2"),
            bic=obj["bic"] if obj.get("bic") is not None else math.nan,
            objective_trace=(),
            converged=bool(obj["converged"]),
        )
        names = [str(n) for n in obj["names"]]
        means = np.asarray(obj["means"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: malformed fit file: {exc}") from exc
    if len(names) != fit.q or means.shape != (fit.q,):
        raise DataError(f"{path}: names/means do not match the coefficient shape")
    return fit, names, means


def _cmd_simulate(args) -> int:
    spec = {"name": args.design}
    if args.series is not None:
        spec["series"] = args.series
    coefficients, error = build_design(spec, where="--design")
    if args.length < 2:
        raise ValueError(f"--length must be at least 2, got {args.length}")
    panel = simulate_var(coefficients, error, length=args.length, seed=args.seed)
    _write_panel_csv(panel, args.out)
    print(f"wrote {args.length} x {panel.n_series} panel to {args.out}")
    return 0


def _cmd_fit(args) -> int:
    if args.lags == "auto" and args.method != "sparse":
        raise ValueError("--lags auto is only available with --method sparse")
    panel = _load_panel(args.data)
    centered = panel.center()
    p = None if args.lags == "auto" else args.lags
    fit = fit_method(args.method, centered, p)
    save_fit(fit, panel.names, centered.means, args.out)
    lam = ""
    if fit.lam1 is not None:
        lam = f" lambda1={fit.lam1!r} lambda2={fit.lam2!r}"
    print(f"fit method={fit.method} lags={fit.p}{lam} -> {args.out}")
    return 0


def _cmd_irf(args) -> int:
    fit, names, _ = load_fit(args.fit)
    if args.horizon < 1:
        raise ValueError(f"--horizon must be at least 1, got {args.horizon}")
    if args.boot < 0:
        raise ValueError(f"--boot must be nonnegative, got {args.boot}")
    if args.boot == 0:
        result = girf(fit, horizon=args.horizon, names=names)
        girf_to_csv(result, args.out)
        print(f"point responses (horizon {args.horizon}) -> {args.out}")
        return 0
    if args.data is None:
        raise ValueError("--boot needs --data to size the bootstrap panels")
    panel = _load_panel(args.data)
    bands = bootstrap_bands(
        fit, panel, n_boot=args.boot, horizon=args.horizon, seed=args.seed
    )
    girf_to_csv(bands, args.out)
    print(
        f"bootstrap bands (horizon {args.horizon}, {args.boot} replicates, "
        f"{bands.n_dropped} dropped) -> {args.out}"
    )
    return 0


def _cmd_forecast(args) -> int:
    if args.lags == "auto" and args.method != "sparse":
        raise ValueError("--lags auto is only available with --method sparse")
    raw = _load_panel(args.data)
    plan = None
    if args.transform == "auto":
        plan = TransformPlan.default_for(raw.names)
        model_panel = transform(raw, plan)
    else:
        model_panel = raw
    p = None if args.lags == "auto" else args.lags
    result = rolling_forecast(
        model_panel, args.method, window=args.window, p=p, end=args.end
    )
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["origin", "series", "forecast", "actual"]
        if plan is not None:
            header += ["level_forecast", "level_actual"]
        writer.writerow(header)
        for i, origin in enumerate(result.origins):
            level_row = None
            if plan is not None:
                level_row = invert_transform(
                    result.forecasts[i], raw.data[origin], plan, raw.names
                )
            for c, name in enumerate(model_panel.names):
                row = [
                    origin,
                    name,
                    repr(float(result.forecasts[i, c])),
                    repr(float(result.actuals[i, c])),
                ]
                if level_row is not None:
                    row += [
                        repr(float(level_row[c])),
                        repr(float(raw.data[origin + 1, c])),
                    ]
                writer.writerow(row)
    mafe = result.mafe() if result.origins else math.nan
    print(
        f"method={args.method} window={args.window} origins={len(result.origins)} "
        f"failures={len(result.failures)} mafe={mafe!r}"
    )
    return 0


def _cmd_network(args) -> int:
    fits = []
    names = None
    first = None
    for path in args.fits:
        fit, fit_names, _ = load_fit(path)
        if names is None:
            names, first = fit_names, path
        elif fit_names != names:
            raise DataError(f"{path}: columns differ from {first}")
        fits.append(fit)
    edge_list = extract_network(fits, names, args.channel)
    out = Path(str(args.out))
    write_graphml(edge_list, Path(str(out) + ".graphml"))
    write_dot(edge_list, Path(str(out) + ".dot"))
    edges_to_csv(edge_list, Path(str(out) + "_edges.csv"))
    print(
        f"channel={args.channel} stores={edge_list.n_stores} "
        f"edges={len(edge_list.edges)} -> {out}.graphml"
    )
    for edge in edge_list.edges:
        print(f"  {edge.source} -> {edge.target} ({edge.support}/{edge_list.n_stores})")
    return 0


def _cmd_bench(args) -> int:
    config = bundled_config() if args.config is None else load_config(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    report = run_experiment(config, args.out)
    print(report.format_table())
    return 0


_HANDLERS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "irf": _cmd_irf,
    "forecast": _cmd_forecast,
    "network": _cmd_network,
    "bench": _cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    try:
        return _HANDLERS[args.command](args)
    except DataError as exc:
        print(f"sparsevar: data error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"sparsevar: numerical failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"sparsevar: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
