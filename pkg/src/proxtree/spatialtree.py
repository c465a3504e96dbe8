"""Binary space-partitioning trees with pluggable split rules.

One tree type covers kd, random-projection, PCA and 2-means trees: every
internal node stores a unit direction ``w`` and threshold ``t`` and sends
``w.x <= t`` left. Spill widens the boundary into a band of half-width
``tau``; depending on ``spill_mode`` the band either duplicates points into
both children at build time or makes queries descend both sides.
"""
from __future__ import annotations

import heapq
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .metricspace import EUCLIDEAN, EmptyDatasetError, Metric, PointSet, as_point, as_pointset

TREE_FORMAT = "treefmt/1"
DEGENERATE_TOL = 1e-12
# relative slack on prune tests so rounding never discards an exact tie
PRUNE_SLACK = 1e-12

SPLIT_KINDS = ("kd", "rp", "pca", "twomeans")
SPILL_MODES = ("duplicate", "both_sides")


@dataclass(frozen=True)
class SplitRule:
    kind: str = "kd"
    seed: Optional[int] = None
    power_iters: int = 100
    tol: float = 1e-9
    max_iters: int = 25

    def __post_init__(self):
        if self.kind not in SPLIT_KINDS:
            raise ValueError(f"unknown split rule {self.kind!r}; expected one of {SPLIT_KINDS}")

    @classmethod
    def kd(cls) -> "SplitRule":
        return cls("kd")

    @classmethod
    def random_projection(cls, seed: Optional[int] = None) -> "SplitRule":
        return cls("rp", seed=seed)

    @classmethod
    def pca(cls, power_iters: int = 100, tol: float = 1e-9) -> "SplitRule":
        return cls("pca", power_iters=power_iters, tol=tol)

    @classmethod
    def two_means(cls, max_iters: int = 25, seed: Optional[int] = None) -> "SplitRule":
        return cls("twomeans", seed=seed, max_iters=max_iters)


@dataclass(frozen=True)
class TreeConfig:
    split: SplitRule = field(default_factory=SplitRule)
    spill_fraction: float = 0.0
    max_leaf_size: int = 8
    spill_mode: str = "duplicate"
    rng_seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.spill_fraction < 0.5):
            raise ValueError("spill_fraction must lie in [0, 0.5)")
        if self.max_leaf_size < 1:
            raise ValueError("max_leaf_size must be >= 1")
        if self.spill_mode not in SPILL_MODES:
            raise ValueError(f"spill_mode must be one of {SPILL_MODES}")


@dataclass
class Node:
    id: int
    parent: int
    depth: int
    size: int
    center: np.ndarray
    radius: float
    direction: Optional[np.ndarray] = None
    threshold: float = 0.0
    spill: float = 0.0
    left: int = -1
    right: int = -1
    indices: Optional[np.ndarray] = None
    # ||w|| in the dual norm of the metric; converts projection gaps to distances
    gap_scale: float = 1.0

    @property
    def is_leaf(self) -> bool:
        return self.left < 0


@dataclass
class SearchReport:
    result: list[tuple[int, float]]
    comparisons: int = 0
    leaves_visited: int = 0
    nodes_visited: int = 0
    leaf_ids: list[int] = field(default_factory=list)

    @property
    def indices(self) -> list[int]:
        return [i for i, _ in self.result]

    @property
    def distances(self) -> list[float]:
        return [d for _, d in self.result]


class SpatialTree:
    """An immutable partition tree over ``X``.

    Nodes live in a flat list; ``nodes[0]`` is the root and children always
    have larger ids than their parent.
    """

    def __init__(self, X: PointSet, metric: Metric, config: TreeConfig, nodes: list[Node]):
        self.X = X
        self.metric = metric
        self.config = config
        self.nodes = nodes
        self.leaves_of: dict[int, list[int]] = {}
        for node in nodes:
            if node.is_leaf:
                for i in node.indices:
                    self.leaves_of.setdefault(int(i), []).append(node.id)
        # true when spill put some point into more than one leaf
        self.duplicated = sum(len(v) for v in self.leaves_of.values()) > len(X)

    @property
    def root(self) -> Node:
        return self.nodes[0]

    @property
    def depth(self) -> int:
        return max(n.depth for n in self.nodes)

    def leaves(self) -> list[Node]:
        return [n for n in self.nodes if n.is_leaf]

    def leaf_sizes(self) -> list[int]:
        return [len(n.indices) for n in self.leaves()]

    def path_to_root(self, node_id: int) -> list[int]:
        path = []
        while node_id >= 0:
            path.append(node_id)
            node_id = self.nodes[node_id].parent
        return path

    def __len__(self) -> int:
        return len(self.X)

    def __repr__(self) -> str:
        return (
            f"SpatialTree(kind={self.config.split.kind}, n={len(self.X)}, "
            f"nodes={len(self.nodes)}, depth={self.depth})"
        )


# ---------------------------------------------------------------- split rules


def _kd_direction(P: np.ndarray) -> np.ndarray:
    spread = np.sum((P - P.mean(axis=0)) ** 2, axis=0)
    w = np.zeros(P.shape[1])
    w[int(np.argmax(spread))] = 1.0
    return w


def _rp_direction(P: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal(P.shape[1])
    norm = np.linalg.norm(g)
    while norm == 0.0:
        g = rng.standard_normal(P.shape[1])
        norm = np.linalg.norm(g)
    return g / norm


def _norm(v: np.ndarray) -> float:
    return math.sqrt(float(v @ v))


def project(P: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Projections ``w.x`` computed row by row.

    Build and search both go through here so a stored point and the same
    point given as a query land on the same side of every threshold
    (a matrix product and a single dot product can differ in the last bit).
    """
    return np.sum(P * w, axis=-1)


def covariance(P: np.ndarray) -> np.ndarray:
    C = P - P.mean(axis=0)
    return C.T @ C / P.shape[0]


def power_iteration(S: np.ndarray, iters: int = 100, tol: float = 1e-9) -> np.ndarray:
    """Leading eigenvector of a symmetric PSD matrix.

    Starts from the normalised all-ones vector (``e_1`` if that start is
    annihilated). Each step applies the current power of ``S`` and then
    squares it, so step ``j`` costs one product but advances the iteration
    by ``2**j`` multiplications. Stops once the eigen-residual is below
    ``tol * ||S||`` or after ``iters`` steps.
    """
    D = S.shape[0]
    scale = _norm(S.ravel())
    v = np.ones(D) / math.sqrt(D)
    if scale == 0.0:
        return v
    if _norm(S @ v) <= tol * scale:
        v = np.zeros(D)
        v[0] = 1.0
    M = S / scale
    for _ in range(iters):
        u = M @ v
        norm = _norm(u)
        if norm == 0.0:
            break
        v = u / norm
        Sv = S @ v
        if _norm(Sv - (v @ Sv) * v) <= tol * scale:
            break
        M = M @ M
        M /= _norm(M.ravel())
    return v


def _two_means(P: np.ndarray, metric: Metric, max_iters: int) -> tuple[np.ndarray, np.ndarray]:
    """Lloyd's iterations with k=2 seeded by an approximate farthest pair."""
    a = int(np.argmax(metric.to_many(P[0], P)))
    b = int(np.argmax(metric.to_many(P[a], P)))
    mu1, mu2 = P[a].copy(), P[b].copy()
    assign = None
    for _ in range(max_iters):
        new = metric.to_many(mu2, P) < metric.to_many(mu1, P)
        if assign is not None and np.array_equal(new, assign):
            break
        assign = new
        if assign.all() or not assign.any():
            break
        mu1 = P[~assign].mean(axis=0)
        mu2 = P[assign].mean(axis=0)
    return mu1, mu2


def _dual_norm(metric: Metric, w: np.ndarray) -> float:
    return float(np.linalg.norm(w, ord=metric.dual_order()))


def lower_median(values: np.ndarray) -> float:
    s = np.sort(values)
    return float(s[(len(s) - 1) // 2])


def choose_split(P: np.ndarray, rule: SplitRule, metric: Metric, rng: np.random.Generator):
    """Direction and threshold for one node, or ``None`` when degenerate."""
    midpoint = None
    if rule.kind == "kd":
        w = _kd_direction(P)
    elif rule.kind == "rp":
        w = _rp_direction(P, rng)
    elif rule.kind == "pca":
        w = power_iteration(covariance(P), rule.power_iters, rule.tol)
    else:
        mu1, mu2 = _two_means(P, metric, rule.max_iters)
        gap = mu1 - mu2
        norm = np.linalg.norm(gap)
        if norm == 0.0:
            w = _kd_direction(P)
        else:
            w = gap / norm
            midpoint = float(w @ (mu1 + mu2) / 2.0)
    proj = project(P, w)
    if proj.max() - proj.min() <= DEGENERATE_TOL:
        return None
    t = midpoint
    if t is None or not (proj <= t).any() or (proj <= t).all():
        t = lower_median(proj)
    if (proj <= t).all():
        # lower median tied with the maximum; step down to the next distinct value
        t = float(proj[proj < proj.max()].max())
    return w, t, proj


def spill_width(proj: np.ndarray, t: float, fraction: float) -> float:
    """Smallest band half-width holding ceil(fraction * m) projections."""
    count = math.ceil(fraction * len(proj))
    if count == 0:
        return 0.0
    return float(np.sort(np.abs(proj - t))[count - 1])


# ---------------------------------------------------------------- build


def _make_node(X: PointSet, metric: Metric, idx: np.ndarray, node_id: int, parent: int, depth: int) -> Node:
    P = X.points[idx]
    center = P.mean(axis=0)
    radius = float(metric.to_many(center, P).max())
    return Node(node_id, parent, depth, len(idx), center, radius)


def build_tree(X, metric: Metric = EUCLIDEAN, config: Optional[TreeConfig] = None) -> SpatialTree:
    """Recursively split ``X`` until nodes hold at most ``max_leaf_size`` points."""
    X = as_pointset(X)
    config = config or TreeConfig()
    if not metric.is_true_metric:
        raise ValueError(f"tree pruning needs a true metric; {metric.kind} is not one")
    if len(X) == 0:
        raise EmptyDatasetError("cannot build a tree over an empty dataset")
    rule = config.split
    rng = np.random.default_rng(config.rng_seed if rule.seed is None else rule.seed)
    duplicate = config.spill_mode == "duplicate"

    nodes: list[Node] = []
    root_idx = np.arange(len(X), dtype=np.int64)
    nodes.append(_make_node(X, metric, root_idx, 0, -1, 0))
    stack = [(0, root_idx)]
    while stack:
        node_id, idx = stack.pop()
        node = nodes[node_id]
        split = None
        if len(idx) > config.max_leaf_size:
            split = choose_split(X.points[idx], rule, metric, rng)
        if split is None:
            node.indices = idx
            continue
        w, t, proj = split
        tau = spill_width(proj, t, config.spill_fraction)
        go_left = proj <= t
        left_mask, right_mask = go_left, ~go_left
        if duplicate and tau > 0.0:
            band = np.abs(proj - t) <= tau
            left_mask, right_mask = go_left | band, ~go_left | band
            if left_mask.all() or right_mask.all():
                # band swallowed a whole side; spilling here would never terminate
                tau = 0.0
                left_mask, right_mask = go_left, ~go_left
        node.direction, node.threshold, node.spill = w, t, tau
        node.gap_scale = _dual_norm(metric, w)
        children = []
        for mask in (left_mask, right_mask):
            child_idx = idx[mask]
            child = _make_node(X, metric, child_idx, len(nodes), node_id, node.depth + 1)
            nodes.append(child)
            children.append((child.id, child_idx))
        node.left, node.right = children[0][0], children[1][0]
        # right pushed first so the left subtree is expanded first
        stack.append(children[1])
        stack.append(children[0])
    return SpatialTree(X, metric, config, nodes)


def build_rp_forest(X, metric: Metric = EUCLIDEAN, config: Optional[TreeConfig] = None, n_trees: int = 4) -> list[SpatialTree]:
    config = config or TreeConfig(split=SplitRule.random_projection())
    if config.split.kind != "rp":
        raise ValueError("a random forest needs the random-projection split rule")
    if n_trees < 1:
        raise ValueError("a forest needs at least one tree")
    forest = []
    for i in range(n_trees):
        rule = config.split
        if rule.seed is not None:
            rule = replace(rule, seed=rule.seed + i)
        forest.append(build_tree(X, metric, replace(config, split=rule, rng_seed=config.rng_seed + i)))
    return forest


# ---------------------------------------------------------------- search

PointFilter = Callable[[np.ndarray], np.ndarray]
NodeFilter = Callable[[Node], bool]


class _KBest:
    """The k smallest (distance, index) pairs seen so far."""

    def __init__(self, k: int, dedupe: bool = True):
        self.k = k
        self.heap: list[tuple[float, int]] = []  # (-d, -i): worst on top
        self.dedupe = dedupe
        self.seen: set[int] = set()

    def fresh(self, idx: np.ndarray) -> np.ndarray:
        """Drop indices already scored (only needed when leaves overlap)."""
        if not self.dedupe:
            return idx
        idx = np.array([i for i in idx.tolist() if i not in self.seen], dtype=np.int64)
        self.seen.update(idx.tolist())
        return idx

    def bound(self) -> float:
        return -self.heap[0][0] if len(self.heap) == self.k else math.inf

    def offer(self, d: float, i: int) -> None:
        item = (-d, -i)
        if len(self.heap) < self.k:
            heapq.heappush(self.heap, item)
        elif item > self.heap[0]:
            heapq.heapreplace(self.heap, item)

    def result(self) -> list[tuple[int, float]]:
        return sorted(((-i, -d) for d, i in self.heap), key=lambda r: (r[1], r[0]))


def _scan_leaf(tree: SpatialTree, node: Node, q: np.ndarray, best: _KBest, report: SearchReport, point_filter) -> None:
    report.leaves_visited += 1
    report.leaf_ids.append(node.id)
    idx = node.indices
    if point_filter is not None and len(idx):
        idx = idx[point_filter(idx)]
    idx = best.fresh(idx)
    if not len(idx):
        return
    d = tree.metric.to_many(q, tree.X.points[idx])
    report.comparisons += len(idx)
    for dist, i in zip(d.tolist(), idx.tolist()):
        best.offer(dist, i)


def _check_query(tree: SpatialTree, q, k: int) -> np.ndarray:
    if k < 1:
        raise ValueError("k must be >= 1")
    return as_point(q, tree.X.dim)


def _exceeds(gap: float, bound: float) -> bool:
    return gap > bound * (1.0 + PRUNE_SLACK) + PRUNE_SLACK


def reached_leaves(tree: SpatialTree, q: np.ndarray, node_filter: Optional[NodeFilter] = None) -> tuple[list[Node], int]:
    """Leaves a defeatist descent reaches, plus the number of nodes touched."""
    both = tree.config.spill_mode == "both_sides"
    out, visited, stack = [], 0, [tree.root]
    while stack:
        node = stack.pop()
        visited += 1
        if node.is_leaf:
            out.append(node)
            continue
        left, right = tree.nodes[node.left], tree.nodes[node.right]
        m = float(project(q, node.direction)) - node.threshold
        if both and node.spill > 0.0 and abs(m) <= node.spill:
            nxt = [right, left]
        else:
            nxt = [left] if m <= 0.0 else [right]
            if node_filter is not None and not node_filter(nxt[0]):
                nxt = [right if nxt[0] is left else left]
        if node_filter is not None:
            nxt = [c for c in nxt if node_filter(c)] or nxt
        stack.extend(nxt)
    return out, visited


def defeatist_nns(tree: SpatialTree, q, k: int = 1, *, point_filter: Optional[PointFilter] = None,
                  node_filter: Optional[NodeFilter] = None) -> SearchReport:
    """Single descent without backtracking (both sides only inside a query-time spill band)."""
    q = _check_query(tree, q, k)
    best = _KBest(k, tree.duplicated)
    report = SearchReport([])
    leaves, report.nodes_visited = reached_leaves(tree, q, node_filter)
    for leaf in leaves:
        _scan_leaf(tree, leaf, q, best, report, point_filter)
    report.result = best.result()
    return report


def comprehensive_nns(tree: SpatialTree, q, k: int = 1, *, point_filter: Optional[PointFilter] = None,
                      node_filter: Optional[NodeFilter] = None, prune: bool = True) -> SearchReport:
    """Exact branch-and-bound search.

    The far child is skipped only when the spill-adjusted hyperplane gap,
    or the node's bounding ball, already exceeds the current k-th best
    distance. ``node_filter`` lets callers drop subtrees that cannot hold an
    admissible point.
    """
    q = _check_query(tree, q, k)
    metric = tree.metric
    best = _KBest(k, tree.duplicated)
    report = SearchReport([])

    def visit(node: Node) -> None:
        if node_filter is not None and not node_filter(node):
            return
        if prune:
            ball_gap = float(metric.to_many(q, node.center[None, :])[0]) - node.radius
            if _exceeds(ball_gap, best.bound()):
                return
        report.nodes_visited += 1
        if node.is_leaf:
            _scan_leaf(tree, node, q, best, report, point_filter)
            return
        m = float(project(q, node.direction)) - node.threshold
        near, far = (node.left, node.right) if m <= 0.0 else (node.right, node.left)
        visit(tree.nodes[near])
        if prune and abs(m) > node.spill:
            if _exceeds((abs(m) - node.spill) / node.gap_scale, best.bound()):
                return
        visit(tree.nodes[far])

    visit(tree.root)
    report.result = best.result()
    return report


def forest_nns(forest: list[SpatialTree], q, k: int = 1) -> SearchReport:
    """Defeatist descent in every tree, then exact scan of the union of reached leaves."""
    if not forest:
        raise ValueError("empty forest")
    q = _check_query(forest[0], q, k)
    best = _KBest(k)
    report = SearchReport([])
    for tree in forest:
        leaves, visited = reached_leaves(tree, q)
        report.nodes_visited += visited
        for leaf in leaves:
            _scan_leaf(forest[0], leaf, q, best, report, None)
    report.result = best.result()
    return report


# ---------------------------------------------------------------- serialisation


def tree_to_dict(tree: SpatialTree) -> dict:
    nodes = []
    for n in tree.nodes:
        rec = {
            "id": n.id,
            "parent": n.parent,
            "depth": n.depth,
            "size": n.size,
            "center": n.center.tolist(),
            "radius": n.radius,
        }
        if n.is_leaf:
            rec["indices"] = [int(i) for i in n.indices]
        else:
            rec.update(w=n.direction.tolist(), t=n.threshold, tau=n.spill, left=n.left, right=n.right)
        nodes.append(rec)
    return {
        "format": TREE_FORMAT,
        "metric": {"kind": tree.metric.kind, "p": tree.metric.p},
        "config": asdict(tree.config),
        "n": len(tree.X),
        "dim": tree.X.dim,
        "nodes": nodes,
    }


def tree_from_dict(data: dict, X) -> SpatialTree:
    X = as_pointset(X)
    if data.get("format") != TREE_FORMAT:
        raise ValueError(f"unsupported tree format {data.get('format')!r}")
    if data["n"] != len(X) or data["dim"] != X.dim:
        raise ValueError("serialised tree does not match the supplied dataset")
    cfg = dict(data["config"])
    cfg["split"] = SplitRule(**cfg["split"])
    config = TreeConfig(**cfg)
    metric = Metric(data["metric"]["kind"], data["metric"]["p"])
    nodes = []
    for rec in data["nodes"]:
        node = Node(rec["id"], rec["parent"], rec["depth"], rec["size"], np.array(rec["center"]), rec["radius"])
        if "indices" in rec:
            node.indices = np.array(rec["indices"], dtype=np.int64)
        else:
            node.direction = np.array(rec["w"])
            node.threshold, node.spill = rec["t"], rec["tau"]
            node.left, node.right = rec["left"], rec["right"]
            node.gap_scale = _dual_norm(metric, node.direction)
        nodes.append(node)
    return SpatialTree(X, metric, config, nodes)


def save_tree(tree: SpatialTree, path) -> None:
    Path(path).write_text(json.dumps(tree_to_dict(tree)))


def load_tree(path, X) -> SpatialTree:
    return tree_from_dict(json.loads(Path(path).read_text()), X)
