"""Cross-category effect networks aggregated over stores by majority vote.

A directed edge A -> B on a given channel means the coefficient cell linking
A's channel variable (as predictor) to B's sales equation is nonzero in more
than half of the stores. Within-category effects are tallied separately and
never drawn as edges. Node influence is out-degree, responsiveness in-degree.
"""

from __future__ import annotations

from dataclasses import dataclass
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from ..exceptions import DataError
from .data import CHANNELS, parse_schema

__all__ = [
    "Edge",
    "EdgeList",
    "cross_effect_matrix",
    "extract_network",
    "store_degree_matrices",
    "support_shares",
    "write_graphml",
    "write_dot",
    "edges_to_csv",
]


@dataclass(frozen=True)
class Edge:
    source: str
    target: str
    channel: str
    support: int


@dataclass(frozen=True)
class EdgeList:
    """Majority-vote network over ``n_stores`` stores for one channel.

    ``edges`` holds only majority cells (support > n_stores/2, strictly),
    sorted by (source, target). ``own_support`` gives the per-category support
    count of the within-category cell on the same channel.
    """

    channel: str
    categories: tuple
    n_stores: int
    edges: tuple
    own_support: tuple

    def influence(self) -> dict:
        """Out-degree per category."""
        out = {c: 0 for c in self.categories}
        for edge in self.edges:
            out[edge.source] += 1
        return out

    def responsiveness(self) -> dict:
        """In-degree per category."""
        out = {c: 0 for c in self.categories}
        for edge in self.edges:
            out[edge.target] += 1
        return out


def _category_layout(names):
    """Categories in sales-block order plus column index per (category, channel)."""
    pairs = parse_schema(names)
    categories = [cat for cat, ch in pairs if ch == "sales"]
    index = {pair: i for i, pair in enumerate(pairs)}
    if not categories:
        raise DataError("no sales columns found; cannot build a category network")
    return categories, index


def cross_effect_matrix(fit, names, channel: str) -> np.ndarray:
    """Boolean matrix: cell (a, b) true iff channel-of-A drives sales-of-B.

    A cell is active when any lag of the corresponding coefficient is nonzero.
    Rows for categories lacking the channel column stay all false.
    """
    if channel not in CHANNELS:
        raise ValueError(f"unknown channel {channel!r}")
    categories, index = _category_layout(names)
    if fit.q != len(names):
        raise DataError(
            f"fit has {fit.q} series but {len(names)} column names were given"
        )
    b = fit.coefficients.b
    active = np.zeros((len(categories), len(categories)), dtype=bool)
    for a, src in enumerate(categories):
        col = index.get((src, channel))
        if col is None:
            continue
        for t, dst in enumerate(categories):
            row = index[(dst, "sales")]
            active[a, t] = bool(np.any(b[:, row, col] != 0.0))
    return active


def _support_counts(fits, names, channel):
    categories, _ = _category_layout(names)
    counts = np.zeros((len(categories), len(categories)), dtype=np.int64)
    for fit in fits:
        counts += cross_effect_matrix(fit, names, channel)
    return categories, counts


def extract_network(fits, names, channel: str) -> EdgeList:
    """Majority vote across stores; strict > half threshold."""
    fits = list(fits)
    if not fits:
        raise DataError("no fits given")
    categories, counts = _support_counts(fits, names, channel)
    n_stores = len(fits)
    edges = []
    for a, src in enumerate(categories):
        for t, dst in enumerate(categories):
            if a == t:
                continue
            if counts[a, t] * 2 > n_stores:
                edges.append(Edge(src, dst, channel, int(counts[a, t])))
    edges.sort(key=lambda e: (e.source, e.target))
    own = tuple((cat, int(counts[i, i])) for i, cat in enumerate(categories))
    return EdgeList(
        channel=channel,
        categories=tuple(categories),
        n_stores=n_stores,
        edges=tuple(edges),
        own_support=own,
    )


def store_degree_matrices(fits, names, channel: str):
    """Per-store cross-effect degrees for concordance tests across stores.

    Returns (influence, responsiveness), each stores x categories, counting
    that store's own nonzero cross cells out of and into each category.
    """
    fits = list(fits)
    if not fits:
        raise DataError("no fits given")
    categories, _ = _category_layout(names)
    k = len(categories)
    influence = np.zeros((len(fits), k), dtype=np.float64)
    responsiveness = np.zeros((len(fits), k), dtype=np.float64)
    off = ~np.eye(k, dtype=bool)
    for m, fit in enumerate(fits):
        active = cross_effect_matrix(fit, names, channel) & off
        influence[m] = active.sum(axis=1)
        responsiveness[m] = active.sum(axis=0)
    return influence, responsiveness


def support_shares(fits, names, channel: str) -> dict:
    """Average share of active within- and cross-category cells over stores."""
    fits = list(fits)
    if not fits:
        raise DataError("no fits given")
    categories, counts = _support_counts(fits, names, channel)
    k = len(categories)
    diag = np.eye(k, dtype=bool)
    within = float(counts[diag].sum()) / (k * len(fits))
    cross = float(counts[~diag].sum()) / max(k * (k - 1) * len(fits), 1)
    return {"within": within, "cross": cross}


def write_graphml(edge_list: EdgeList, path) -> None:
    """Deterministic GraphML with channel and support edge attributes."""
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<graphml xmlns="http://graphml.graphdrawing.org/xmlns">',
        '  <key id="channel" for="edge" attr.name="channel" attr.type="string"/>',
        '  <key id="support" for="edge" attr.name="support" attr.type="int"/>',
        '  <key id="stores" for="graph" attr.name="stores" attr.type="int"/>',
        '  <graph id="network" edgedefault="directed">',
        f'    <data key="stores">{edge_list.n_stores}</data>',
    ]
    for category in sorted(edge_list.categories):
        lines.append(f"    <node id={quoteattr(category)}/>")
    for edge in sorted(edge_list.edges, key=lambda e: (e.source, e.target)):
        lines.append(
            f"    <edge source={quoteattr(edge.source)} target={quoteattr(edge.target)}>"
        )
        lines.append(f'      <data key="channel">{escape(edge.channel)}</data>')
        lines.append(f'      <data key="support">{edge.support}</data>')
        lines.append("    </edge>")
    lines.append("  </graph>")
    lines.append("</graphml>")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_dot(edge_list: EdgeList, path) -> None:
    """Deterministic Graphviz digraph with support-labelled edges."""

    def quote(name: str) -> str:
        return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'

    lines = ["digraph network {"]
    for category in sorted(edge_list.categories):
        lines.append(f"  {quote(category)};")
    for edge in sorted(edge_list.edges, key=lambda e: (e.source, e.target)):
        label = f"{edge.channel} {edge.support}/{edge_list.n_stores}"
        lines.append(
            f"  {quote(edge.source)} -> {quote(edge.target)} [label={quote(label)}];"
        )
    lines.append("}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def edges_to_csv(edge_list: EdgeList, path) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source", "target", "channel", "support", "stores"])
        for edge in sorted(edge_list.edges, key=lambda e: (e.source, e.target)):
            writer.writerow(
                [edge.source, edge.target, edge.channel, edge.support, edge_list.n_stores]
            )
