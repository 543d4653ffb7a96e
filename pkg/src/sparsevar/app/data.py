"""CSV ingestion and variable transforms for weekly store panels.

Input files are plain CSV: a leading week-label column followed by one column
per variable. Store files use names of the form ``<category>__<channel>`` with
channel one of ``sales``, ``price``, ``promo``. After validation the columns
are reordered into blocks (all sales, then all prices, then all promos) so a
fitted model's coefficient cells can be addressed by category and channel.

Transforms map levels to the stationary scale the model is fit on: log
differences for sales and prices, plain differences for promotion, passthrough
otherwise. Every transform is invertible one step ahead given the last
observed level, which is how level-scale forecasts are produced.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..exceptions import DataError
from ..model import TimeSeriesPanel

__all__ = [
    "PanelSource",
    "read_panel_csv",
    "split_schema_name",
    "parse_schema",
    "ingest",
    "ingest_stores",
    "TransformPlan",
    "transform",
    "invert_transform",
]

CHANNELS = ("sales", "price", "promo")


@dataclass(frozen=True)
class PanelSource:
    """One store's CSV file."""

    store_id: str
    path: str | Path


def read_panel_csv(path) -> tuple[list[int], list[str], np.ndarray]:
    """Read a week-labelled CSV without imposing the category schema.

    Returns (week_labels, variable_names, data). Week labels must be integers,
    unique, and consecutive; every cell must parse as a finite number. All
    violations raise DataError naming the offending week and column.
    """
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path}: file is empty")
    header = [c.strip() for c in rows[0]]
    if len(header) < 2:
        raise DataError(f"{path}: need a week column plus at least one variable")
    names = header[1:]
    seen = set()
    for name in names:
        if not name:
            raise DataError(f"{path}: blank variable name in header")
        if name in seen:
            raise DataError(f"{path}: duplicate column name {name!r}")
        seen.add(name)
    body = [row for row in rows[1:] if row]
    if not body:
        raise DataError(f"{path}: no data rows")
    weeks: list[int] = []
    data = np.empty((len(body), len(names)), dtype=np.float64)
    week_seen = set()
    for r, row in enumerate(body):
        if len(row) != len(header):
            raise DataError(
                f"{path}: row {r + 2} has {len(row)} fields, expected {len(header)}"
            )
        label = row[0].strip()
        try:
            week = int(label)
        except ValueError:
            raise DataError(
                f"{path}: week label {label!r} in row {r + 2} is not an integer"
            ) from None
        if week in week_seen:
            raise DataError(f"{path}: duplicate week label {week}")
        week_seen.add(week)
        weeks.append(week)
        for c, cell in enumerate(row[1:]):
            text = cell.strip()
            if not text:
                raise DataError(
                    f"{path}: missing value at week {week}, column {names[c]}"
                )
            try:
                value = float(text)
            except ValueError:
                raise DataError(
                    f"{path}: non-numeric value {text!r} at week {week}, "
                    f"column {names[c]}"
                ) from None
            if not math.isfinite(value):
                raise DataError(
                    f"{path}: non-finite value at week {week}, column {names[c]}"
                )
            data[r, c] = value
    for prev, cur in zip(weeks, weeks[1:]):
        if cur != prev + 1:
            raise DataError(
                f"{path}: weeks must be consecutive, found {prev} followed by {cur}"
            )
    return weeks, names, data


def split_schema_name(name: str) -> tuple[str, str]:
    """Split ``<category>__<channel>`` and validate the channel."""
    parts = name.split("__")
    if len(parts) != 2 or not parts[0] or not parts[1]:
        raise DataError(
            f"column {name!r} does not follow the <category>__<channel> naming scheme"
        )
    category, channel = parts
    if channel not in CHANNELS:
        raise DataError(
            f"column {name!r} has unknown channel {channel!r}; "
            f"expected one of {', '.join(CHANNELS)}"
        )
    return category, channel


def parse_schema(names) -> tuple[tuple[str, str], ...]:
    """Category/channel pair for every column name, in order."""
    return tuple(split_schema_name(name) for name in names)


def _schema_order(names) -> list[str]:
    """Block-ordered column list: sales, then prices, then promos.

    Categories keep the order of their first appearance among the sales
    columns. Every category needs sales and price; promo is optional.
    """
    by_channel: dict[str, dict[str, str]] = {ch: {} for ch in CHANNELS}
    categories: list[str] = []
    for name in names:
        category, channel = split_schema_name(name)
        if category in by_channel[channel]:
            raise DataError(f"category {category!r} has two {channel} columns")
        by_channel[channel][category] = name
        if channel == "sales" and category not in categories:
            categories.append(category)
    for category in sorted(set().union(*(by_channel[ch] for ch in CHANNELS))):
        if category not in by_channel["sales"]:
            raise DataError(f"category {category!r} is missing its sales column")
        if category not in by_channel["price"]:
            raise DataError(f"category {category!r} is missing its price column")
    ordered = [by_channel["sales"][c] for c in categories]
    ordered += [by_channel["price"][c] for c in categories]
    ordered += [by_channel["promo"][c] for c in categories if c in by_channel["promo"]]
    return ordered


def ingest(source: PanelSource) -> TimeSeriesPanel:
    """Read one store file and return its panel in block column order."""
    weeks, names, data = read_panel_csv(source.path)
    ordered = _schema_order(names)
    index = [names.index(n) for n in ordered]
    return TimeSeriesPanel(data[:, index], names=ordered)


def ingest_stores(sources) -> list[TimeSeriesPanel]:
    """Ingest several stores and insist they cover identical variables and weeks."""
    sources = list(sources)
    if not sources:
        raise DataError("no store files given")
    panels = []
    ref_weeks = None
    ref_names = None
    ref_store = sources[0].store_id
    for source in sources:
        weeks, names, data = read_panel_csv(source.path)
        ordered = _schema_order(names)
        index = [names.index(n) for n in ordered]
        if ref_weeks is None:
            ref_weeks, ref_names = weeks, ordered
        else:
            if ordered != ref_names:
                raise DataError(
                    f"store {source.store_id!r} columns differ from store {ref_store!r}"
                )
            if weeks != ref_weeks:
                raise DataError(
                    f"store {source.store_id!r} weeks differ from store {ref_store!r}"
                )
        panels.append(TimeSeriesPanel(data[:, index], names=ordered))
    return panels


_RULES = ("log-diff", "diff", "none")


@dataclass(frozen=True)
class TransformPlan:
    """Per-variable stationarity rule: log-diff, diff, or none."""

    rules: dict

    def __post_init__(self):
        for name, rule in self.rules.items():
            if rule not in _RULES:
                raise ValueError(
                    f"unknown rule {rule!r} for variable {name!r}; "
                    f"expected one of {', '.join(_RULES)}"
                )

    @classmethod
    def default_for(cls, names) -> "TransformPlan":
        """Suffix defaults: sales and price log-diff, promo diff, else none."""
        rules = {}
        for name in names:
            if name.endswith("__sales") or name.endswith("__price"):
                rules[name] = "log-diff"
            elif name.endswith("__promo"):
                rules[name] = "diff"
            else:
                rules[name] = "none"
        return cls(rules)

    def rule_for(self, name: str) -> str:
        try:
            return self.rules[name]
        except KeyError:
            raise KeyError(f"transform plan has no rule for variable {name!r}") from None


def transform(panel: TimeSeriesPanel, plan: TransformPlan) -> TimeSeriesPanel:
    """Apply the plan column by column; the result is one row shorter.

    Passthrough columns also drop their first observation so all columns stay
    aligned in time. Log rules require strictly positive levels.
    """
    if panel.n_obs < 2:
        raise DataError("need at least two observations to difference")
    out = np.empty((panel.n_obs - 1, panel.n_series), dtype=np.float64)
    for c, name in enumerate(panel.names):
        column = panel.data[:, c]
        rule = plan.rule_for(name)
        if rule == "log-diff":
            bad = np.flatnonzero(column <= 0.0)
            if bad.size:
                r = int(bad[0])
                raise DataError(
                    f"nonpositive value {column[r]!r} for log-diff variable "
                    f"{name} at row {r}"
                )
            logged = np.log(column)
            out[:, c] = logged[1:] - logged[:-1]
        elif rule == "diff":
            out[:, c] = column[1:] - column[:-1]
        else:
            out[:, c] = column[1:]
    return TimeSeriesPanel(out, names=panel.names)


def invert_transform(
    step_values, last_levels, plan: TransformPlan, names
) -> np.ndarray:
    """Map one transformed-scale step back to levels given the prior levels.

    log-diff gives last * exp(step), diff gives last + step, none passes the
    step through unchanged.
    """
    step = np.asarray(step_values, dtype=np.float64)
    last = np.asarray(last_levels, dtype=np.float64)
    names = list(names)
    if step.shape != (len(names),) or last.shape != (len(names),):
        raise ValueError(
            f"expected vectors of length {len(names)}, got {step.shape} and {last.shape}"
        )
    out = np.empty_like(step)
    for c, name in enumerate(names):
        rule = plan.rule_for(name)
        if rule == "log-diff":
            if last[c] <= 0.0:
                raise DataError(
                    f"nonpositive prior level {last[c]!r} for log-diff variable {name}"
                )
            out[c] = last[c] * math.exp(step[c])
        elif rule == "diff":
            out[c] = last[c] + step[c]
        else:
            out[c] = step[c]
    return out
