"""Colored nearest-neighbor search and the reductions between NNS, BNNS and CNNS.

Chromatic search runs on an ordinary :class:`SpatialTree`; a
:class:`ColorMap` adds a color-count histogram to every node so whole
subtrees holding only the query's color can be skipped. Histograms are
updated in place by :func:`recolor`, which is what the Boruvka EMST needs
when components merge.
"""
from __future__ import annotations

from collections import Counter
from typing import Optional

import numpy as np

from .metricspace import EUCLIDEAN, Metric, PointSet, as_point, as_pointset
from .spatialtree import SearchReport, SpatialTree, TreeConfig, build_tree, comprehensive_nns, defeatist_nns


class NoOppositeColor(LookupError):
    """No point carries a color different from the query's."""


class ColorMap:
    """Per-point colors plus per-node color histograms for one tree.

    Histograms count leaf occurrences, so with spill duplication a point
    contributes once for every leaf that holds it.
    """

    def __init__(self, tree: SpatialTree, colors):
        colors = np.array(colors, dtype=np.int64)
        if colors.shape != (len(tree.X),):
            raise ValueError("need exactly one color per point")
        if np.any(colors < 0):
            raise ValueError("colors must be natural numbers")
        self.tree = tree
        self.colors = colors
        self.hist, self.totals = self._count()

    def _count(self) -> tuple[list[Counter], list[int]]:
        hist = [Counter() for _ in self.tree.nodes]
        totals = [0] * len(self.tree.nodes)
        for leaf in self.tree.leaves():
            leaf_counts = Counter(self.colors[leaf.indices].tolist())
            n = len(leaf.indices)
            for node_id in self.tree.path_to_root(leaf.id):
                hist[node_id].update(leaf_counts)
                totals[node_id] += n
        return hist, totals

    def recount(self) -> list[Counter]:
        """Histograms rebuilt from scratch (consistency check)."""
        return self._count()[0]

    def has_other(self, node_id: int, color: int) -> bool:
        return self.totals[node_id] > self.hist[node_id].get(color, 0)

    def root_histogram(self) -> dict[int, int]:
        return {c: n for c, n in self.hist[0].items() if n}


def recolor(cmap: ColorMap, indices, new_color: int) -> int:
    """Give ``indices`` the color ``new_color``, patching every ancestor histogram.

    Returns the number of points whose color actually changed.
    """
    if new_color < 0:
        raise ValueError("colors must be natural numbers")
    n = len(cmap.colors)
    events = 0
    for i in dict.fromkeys(int(i) for i in indices):
        if not 0 <= i < n:
            raise IndexError(f"point index {i} out of range for {n} points")
        old = int(cmap.colors[i])
        if old == new_color:
            continue
        cmap.colors[i] = new_color
        events += 1
        for leaf_id in cmap.tree.leaves_of[i]:
            for node_id in cmap.tree.path_to_root(leaf_id):
                h = cmap.hist[node_id]
                h[old] -= 1
                if not h[old]:
                    del h[old]
                h[new_color] += 1
    return events


def cnns(cmap: ColorMap, q, q_color: int, k: int = 1, exact: bool = True) -> SearchReport:
    """Nearest points whose color differs from ``q_color``.

    Exact mode is a branch-and-bound search that also skips any subtree
    whose histogram holds nothing but ``q_color``. Defeatist mode descends
    once, steering away from such subtrees.
    """
    if not cmap.has_other(0, q_color):
        raise NoOppositeColor(f"every point has color {q_color}")
    colors = cmap.colors

    def point_ok(idx: np.ndarray) -> np.ndarray:
        return colors[idx] != q_color

    def node_ok(node) -> bool:
        return cmap.has_other(node.id, q_color)

    search = comprehensive_nns if exact else defeatist_nns
    return search(cmap.tree, q, k, point_filter=point_ok, node_filter=node_ok)


def _colored(X, colors) -> tuple[PointSet, np.ndarray]:
    X = as_pointset(X)
    if colors is None:
        colors = X.colors
    if colors is None:
        raise ValueError("colors are required")
    colors = np.asarray(colors, dtype=np.int64)
    if colors.shape != (len(X),):
        raise ValueError("need exactly one color per point")
    return X, colors


def bnns_via_nns(q, q_color: int, X, colors=None, metric: Metric = EUCLIDEAN,
                 config: Optional[TreeConfig] = None, k: int = 1) -> SearchReport:
    """Build a plain tree over the other-colored subset and run exact NNS on it."""
    X, colors = _colored(X, colors)
    keep = np.flatnonzero(colors != q_color)
    if not len(keep):
        raise NoOppositeColor(f"every point has color {q_color}")
    tree = build_tree(X.subset(keep), metric, config)
    report = comprehensive_nns(tree, q, k)
    report.result = [(int(keep[i]), d) for i, d in report.result]
    return report


def nns_via_bnns(q, X, metric: Metric = EUCLIDEAN, config: Optional[TreeConfig] = None, k: int = 1) -> SearchReport:
    """Plain NNS posed as a bichromatic query: ``q`` gets color 0, all of ``X`` color 1."""
    X = as_pointset(X)
    return bnns_via_nns(q, 0, X, np.ones(len(X), dtype=np.int64), metric, config, k)


def bnns_via_cnns(q, q_color: int, X, colors=None, metric: Metric = EUCLIDEAN,
                  config: Optional[TreeConfig] = None, k: int = 1) -> SearchReport:
    X, colors = _colored(X, colors)
    return cnns(ColorMap(build_tree(X, metric, config), colors), q, q_color, k)


def filtered_scan(q, q_color: int, X, colors=None, metric: Metric = EUCLIDEAN, k: int = 1) -> list[tuple[int, float]]:
    """Brute-force chromatic NNS, the reference every other route is checked against."""
    X, colors = _colored(X, colors)
    keep = np.flatnonzero(colors != q_color)
    if not len(keep):
        raise NoOppositeColor(f"every point has color {q_color}")
    q = as_point(q, X.dim)
    d = metric.to_many(q, X.points[keep])
    order = np.lexsort((keep, d))[:k]
    return [(int(keep[j]), float(d[j])) for j in order]


BCP_MODES = ("scan", "n_queries", "dual")


def bcp(X, colors=None, metric: Metric = EUCLIDEAN, mode: str = "scan",
        config: Optional[TreeConfig] = None) -> tuple[int, int, float]:
    """Closest pair of differently-colored points as ``(i, j, d)`` with ``i < j``.

    Ties resolve to the lexicographically smallest ``(d, i, j)``.
    """
    X, colors = _colored(X, colors)
    distinct = np.unique(colors)
    if len(distinct) < 2:
        raise NoOppositeColor("closest pair needs at least two colors")
    if mode == "scan":
        return _bcp_scan(X, colors, metric)
    if mode == "n_queries":
        cmap = ColorMap(build_tree(X, metric, config), colors)
        best = None
        for i in range(len(X)):
            j, d = cnns(cmap, X.points[i], int(colors[i]), 1).result[0]
            cand = (d, min(i, j), max(i, j))
            if best is None or cand < best:
                best = cand
        return best[1], best[2], best[0]
    if mode == "dual":
        from .dualbatch import build_query_tree, dual_nns

        best = None
        for c in distinct[1:]:
            qi = np.flatnonzero(colors == c)
            ri = np.flatnonzero(colors < c)
            qtree = build_query_tree(X.subset(qi), alpha=0.0, metric=metric)
            rtree = build_tree(X.subset(ri), metric, config)
            out = dual_nns(qtree, rtree, 1)
            for a, rep in zip(qi, out.reports):
                j, d = rep.result[0]
                j = int(ri[j])
                cand = (d, min(int(a), j), max(int(a), j))
                if best is None or cand < best:
                    best = cand
        return best[1], best[2], best[0]
    raise ValueError(f"unknown bcp mode {mode!r}; expected one of {BCP_MODES}")


def _bcp_scan(X: PointSet, colors: np.ndarray, metric: Metric) -> tuple[int, int, float]:
    best = None
    for i in range(len(X) - 1):
        js = np.arange(i + 1, len(X))
        js = js[colors[js] != colors[i]]
        if not len(js):
            continue
        d = metric.to_many(X.points[i], X.points[js])
        j = int(np.argmin(d))  # first minimum: smallest partner index
        cand = (float(d[j]), i, int(js[j]))
        if best is None or cand < best:
            best = cand
    return best[1], best[2], best[0]
