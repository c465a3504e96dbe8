"""Proximity problems solved on top of the nearest/farthest-neighbor primitives."""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .chromatic import ColorMap, cnns, recolor
from .metricspace import EUCLIDEAN, EmptyDatasetError, Metric, as_point, as_pointset, brute_nn
from .spatialtree import TreeConfig, build_tree


@dataclass
class EmstResult:
    edges: list[tuple[int, int, float]]
    total_weight: float
    cnns_queries: int
    recolor_events: int
    rounds: int


@dataclass
class KCenterResult:
    centers: list[int]
    cost: float


def emst_boruvka(X, metric: Metric = EUCLIDEAN, config: Optional[TreeConfig] = None) -> EmstResult:
    """Minimum spanning tree of the complete graph on ``X`` via Boruvka rounds.

    Component ids double as colors in a single chromatic tree. Each round
    every vertex asks for its nearest differently-colored point, each
    component keeps its lightest outgoing edge, and merged components are
    relabelled by recoloring the smaller side. Edge ties are broken by
    ``(weight, min endpoint, max endpoint)`` so equal weights never close a
    cycle.
    """
    X = as_pointset(X)
    n = len(X)
    if n == 0:
        raise EmptyDatasetError("EMST of an empty point set")
    cmap = ColorMap(build_tree(X, metric, config), np.arange(n))
    members = {i: [i] for i in range(n)}
    edges: list[tuple[int, int, float]] = []
    queries = events = rounds = 0

    while len(members) > 1:
        rounds += 1
        lightest: dict[int, tuple[float, int, int]] = {}
        for v in range(n):
            cv = int(cmap.colors[v])
            x, d = cnns(cmap, X.points[v], cv).result[0]
            queries += 1
            cand = (d, min(v, x), max(v, x))
            if cv not in lightest or cand < lightest[cv]:
                lightest[cv] = cand
        for d, u, v in sorted(set(lightest.values())):
            cu, cv = int(cmap.colors[u]), int(cmap.colors[v])
            if cu == cv:
                continue
            if len(members[cu]) < len(members[cv]):
                cu, cv = cv, cu
            events += recolor(cmap, members[cv], cu)
            members[cu].extend(members.pop(cv))
            edges.append((u, v, d))

    edges.sort(key=lambda e: (e[2], e[0], e[1]))
    return EmstResult(edges, float(sum(e[2] for e in edges)), queries, events, rounds)


def farthest_first(X, metric: Metric = EUCLIDEAN, k: int = 1, start_index: int = 0) -> KCenterResult:
    """Gonzalez's greedy k-center traversal (a 2-approximation)."""
    X = as_pointset(X)
    n = len(X)
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    if not 0 <= start_index < n:
        raise IndexError("start_index out of range")
    centers = [start_index]
    gap = metric.to_many(X.points[start_index], X.points)
    while len(centers) < k:
        z = int(np.argmax(gap))
        centers.append(z)
        gap = np.minimum(gap, metric.to_many(X.points[z], X.points))
    return KCenterResult(centers, float(gap.max()))


def kcenter_cost(X, metric: Metric = EUCLIDEAN, centers=()) -> float:
    X = as_pointset(X)
    centers = list(centers)
    if not centers:
        raise ValueError("at least one center is required")
    gap = np.full(len(X), math.inf)
    for c in centers:
        gap = np.minimum(gap, metric.to_many(X.points[c], X.points))
    return float(gap.max())


def greedy_tsp(X, metric: Metric = EUCLIDEAN, start_index: int = 0) -> tuple[list[int], float]:
    """Nearest-unvisited-neighbor tour; the length includes the closing edge."""
    X = as_pointset(X)
    n = len(X)
    if n == 0:
        raise EmptyDatasetError("tour of an empty point set")
    unvisited = np.ones(n, dtype=bool)
    tour, length, v = [start_index], 0.0, start_index
    unvisited[v] = False
    while unvisited.any():
        rest = np.flatnonzero(unvisited)
        d = metric.to_many(X.points[v], X.points[rest])
        j = int(np.argmin(d))
        length += float(d[j])
        v = int(rest[j])
        unvisited[v] = False
        tour.append(v)
    if n > 1:
        length += float(metric.to_many(X.points[v], X.points[start_index][None, :])[0])
    return tour, length


INVERSE_DISTANCE_EPS = 1e-12


def knn_classify(X_train, labels=None, q=None, k: int = 1, weighting: str = "uniform",
                 metric: Metric = EUCLIDEAN, prior: Optional[Mapping[int, float]] = None) -> int:
    """Label of ``q`` by vote among its ``k`` exact nearest neighbors.

    ``weighting`` is ``uniform``, ``prior`` (per-label weights times vote
    counts) or ``inverse_distance``. Ties go to the smallest label.
    """
    X_train = as_pointset(X_train)
    if labels is None:
        labels = X_train.labels
    if labels is None:
        raise ValueError("training labels are required")
    labels = np.asarray(labels)
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > len(X_train):
        raise ValueError("k exceeds the training set size")
    q = as_point(q, X_train.dim)
    votes: dict[int, float] = defaultdict(float)
    for i, d in brute_nn(metric, q, X_train, k):
        lab = int(labels[i])
        if weighting == "uniform":
            votes[lab] += 1.0
        elif weighting == "prior":
            if prior is None:
                raise ValueError("prior weighting needs per-label weights")
            votes[lab] += float(prior.get(lab, 1.0))
        elif weighting == "inverse_distance":
            votes[lab] += 1.0 / max(d, INVERSE_DISTANCE_EPS)
        else:
            raise ValueError(f"unknown weighting {weighting!r}")
    top = max(votes.values())
    return min(lab for lab, v in votes.items() if v == top)
