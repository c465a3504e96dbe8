"""Dual-tree batch nearest-neighbor search.

Queries are first grouped: a query joins a group only if it lies within
``alpha`` of every member already there, so each group has pairwise
distances below ``alpha``. Groups are then arranged in a binary tree by
distance to a pivot. The traversal walks query-tree and reference-tree
nodes together and drops a pair once the gap between their bounding balls
exceeds what any query under the query node still needs.

A merged group is traversed once through its representative. Because every
member is within ``alpha`` of the representative, keeping the
representative's candidates out to ``kth + 2*alpha`` is enough to finish
each member exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .metricspace import EUCLIDEAN, Metric, PointSet, as_pointset
from .spatialtree import SearchReport, SpatialTree, _exceeds, _KBest

BETA_RULES = ("radius", "median_pair", "fixed")


@dataclass
class QueryGroup:
    rep: int
    members: np.ndarray

    @property
    def merged(self) -> bool:
        return len(self.members) > 1


@dataclass
class QueryNode:
    id: int
    parent: int
    groups: list[int]
    members: np.ndarray
    rep: int
    center: np.ndarray
    radius: float
    merged: bool = False
    beta: float = 0.0
    left: int = -1
    right: int = -1

    @property
    def is_leaf(self) -> bool:
        return self.left < 0


@dataclass
class QueryTree:
    Q: PointSet
    metric: Metric
    alpha: float
    groups: list[QueryGroup]
    nodes: list[QueryNode]

    @property
    def root(self) -> QueryNode:
        return self.nodes[0]

    def leaves(self) -> list[QueryNode]:
        return [n for n in self.nodes if n.is_leaf]


@dataclass
class DualBounds:
    B1: float
    B2: float


@dataclass
class DualResult:
    reports: list[SearchReport]
    pruned_pairs: int = 0
    base_cases: int = 0
    comparisons: int = 0


def _alpha_groups(Q: PointSet, metric: Metric, alpha: float) -> list[QueryGroup]:
    """Greedy leader grouping in index order; every pair in a group is closer than ``alpha``."""
    n = len(Q)
    free = np.ones(n, dtype=bool)
    groups = []
    for i in range(n):
        if not free[i]:
            continue
        free[i] = False
        members = [i]
        if alpha > 0.0 and free.any():
            later = np.flatnonzero(free)
            later = later[later > i]
            if len(later):
                close = later[metric.to_many(Q.points[i], Q.points[later]) < alpha]
                for j in close.tolist():
                    if len(members) == 1 or np.all(metric.to_many(Q.points[j], Q.points[members[1:]]) < alpha):
                        members.append(j)
                        free[j] = False
        groups.append(QueryGroup(i, np.array(members, dtype=np.int64)))
    return groups


def build_query_tree(Q, alpha: float = 0.0, beta_rule: str = "radius", beta: Optional[float] = None,
                     leaf_size: int = 8, metric: Metric = EUCLIDEAN) -> QueryTree:
    """Group ``alpha``-close queries, then split groups by distance to a pivot.

    The pivot of a node is its smallest-index query. Groups whose
    representative is closer than ``beta`` to the pivot go left. Splitting
    stops when a node holds at most ``leaf_size`` groups or one side of
    the split would be empty.
    """
    Q = as_pointset(Q)
    if len(Q) == 0:
        raise ValueError("query set is empty")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if beta_rule not in BETA_RULES:
        raise ValueError(f"beta_rule must be one of {BETA_RULES}")
    if beta_rule == "fixed" and beta is None:
        raise ValueError("the fixed beta rule needs a value")
    if leaf_size < 1:
        raise ValueError("leaf_size must be >= 1")
    groups = _alpha_groups(Q, metric, alpha)
    reps = np.array([g.rep for g in groups])
    nodes: list[QueryNode] = []

    def make(gids: list[int], parent: int) -> int:
        members = np.sort(np.concatenate([groups[g].members for g in gids]))
        P = Q.points[members]
        center = P.mean(axis=0)
        radius = float(metric.to_many(center, P).max())
        node = QueryNode(len(nodes), parent, gids, members, int(members[0]), center, radius,
                         merged=len(gids) == 1 and groups[gids[0]].merged)
        nodes.append(node)
        if len(gids) <= leaf_size:
            return node.id
        pivot = Q.points[node.rep]
        d = metric.to_many(pivot, Q.points[reps[gids]])
        if beta_rule == "radius":
            b = radius
        elif beta_rule == "median_pair":
            b = float(np.median(d))
        else:
            b = float(beta)
        near = d < b
        if near.all() or not near.any():
            return node.id
        node.beta = b
        node.left = make([g for g, m in zip(gids, near) if m], node.id)
        node.right = make([g for g, m in zip(gids, near) if not m], node.id)
        return node.id

    make(list(range(len(groups))), -1)
    return QueryTree(Q, metric, float(alpha), groups, nodes)


def dual_bounds(qtree: QueryTree, node: QueryNode, kth: np.ndarray) -> DualBounds:
    """Both node-level bounds for a table of per-query k-th best distances."""
    vals = kth[node.members]
    return DualBounds(float(vals.max()), float(vals.min()) + 2.0 * node.radius)


class _GroupState:
    def __init__(self, group: QueryGroup, k: int, slack: float, dedupe: bool):
        self.group = group
        self.best = _KBest(k, dedupe)
        self.slack = slack
        self.cands: list[tuple[float, int]] = []
        self.comparisons = 0
        self.leaves = 0

    def need(self) -> float:
        """Largest distance from the representative any member may still need."""
        return self.best.bound() + self.slack


def dual_nns(qtree: QueryTree, rtree: SpatialTree, k: int = 1, prune: bool = True) -> DualResult:
    """Exact k-NN for every query of ``qtree`` against the points of ``rtree``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    metric = qtree.metric
    if rtree.metric != metric:
        raise ValueError("query and reference trees use different metrics")
    if qtree.Q.dim != rtree.X.dim:
        raise ValueError("query and reference points differ in dimension")
    Qp, Xp = qtree.Q.points, rtree.X.points
    states = [_GroupState(g, k, qtree.alpha if g.merged else 0.0, rtree.duplicated) for g in qtree.groups]
    out = DualResult([])
    rep_points = {n.id: Qp[[qtree.groups[g].rep for g in n.groups]] for n in qtree.nodes if n.is_leaf}

    def node_bound(qn: QueryNode) -> float:
        b1 = max(states[g].need() for g in qn.groups)
        b2 = min(states[g].best.bound() for g in qn.groups) + 2.0 * qn.radius
        return min(b1, b2)

    def gap(qn: QueryNode, rn) -> float:
        return float(metric.to_many(qn.center, rn.center[None, :])[0]) - qn.radius - rn.radius

    def base_case(qn: QueryNode, rn) -> None:
        out.base_cases += 1
        if prune:
            # one vectorised ball test for all groups of the query leaf
            reach = metric.to_many(rn.center, rep_points[qn.id]) - rn.radius
        for pos, g in enumerate(qn.groups):
            st = states[g]
            if prune and _exceeds(float(reach[pos]) - st.slack, st.need()):
                continue
            rep = Qp[st.group.rep]
            idx = st.best.fresh(rn.indices)
            st.leaves += 1
            if not len(idx):
                continue
            d = metric.to_many(rep, Xp[idx])
            st.comparisons += len(idx)
            out.comparisons += len(idx)
            for dist, i in zip(d.tolist(), idx.tolist()):
                st.best.offer(dist, i)
            if st.group.merged:
                keep = st.best.bound() + 2.0 * st.slack
                st.cands.extend((dist, i) for dist, i in zip(d.tolist(), idx.tolist()) if dist <= keep * (1 + 1e-12) + 1e-12)

    def visit(qn: QueryNode, rn) -> None:
        if prune and _exceeds(gap(qn, rn), node_bound(qn)):
            out.pruned_pairs += 1
            return
        if qn.is_leaf and rn.is_leaf:
            base_case(qn, rn)
        elif qn.is_leaf or (not rn.is_leaf and rn.radius >= qn.radius):
            kids = [rtree.nodes[rn.left], rtree.nodes[rn.right]]
            kids.sort(key=lambda c: float(metric.to_many(qn.center, c.center[None, :])[0]))
            for child in kids:
                visit(qn, child)
        else:
            visit(qtree.nodes[qn.left], rn)
            visit(qtree.nodes[qn.right], rn)

    visit(qtree.root, rtree.root)

    reports: list[Optional[SearchReport]] = [None] * len(qtree.Q)
    for st in states:
        g = st.group
        rep_result = st.best.result()
        if not g.merged:
            reports[g.rep] = SearchReport(rep_result, st.comparisons, st.leaves, 0)
            continue
        keep = st.best.bound() + 2.0 * st.slack
        pool = {i: None for dist, i in st.cands if dist <= keep * (1 + 1e-12) + 1e-12}
        for i, _ in rep_result:
            pool[i] = None
        pool_idx = np.array(sorted(pool), dtype=np.int64)
        for m in g.members:
            m = int(m)
            if m == g.rep:
                reports[m] = SearchReport(rep_result, st.comparisons, st.leaves, 0)
                continue
            d = metric.to_many(Qp[m], Xp[pool_idx])
            out.comparisons += len(pool_idx)
            order = np.lexsort((pool_idx, d))[:k]
            result = [(int(pool_idx[j]), float(d[j])) for j in order]
            reports[m] = SearchReport(result, len(pool_idx), st.leaves, 0)
    out.reports = reports
    return out
