import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from proxtree.bench.data import generate
from proxtree.metricspace import EUCLIDEAN, EmptyDatasetError, Metric, brute_nn
from proxtree.spatialtree import (
    SPILL_MODES,
    SPLIT_KINDS,
    SplitRule,
    TreeConfig,
    build_rp_forest,
    build_tree,
    comprehensive_nns,
    covariance,
    defeatist_nns,
    forest_nns,
    load_tree,
    power_iteration,
    project,
    save_tree,
    tree_from_dict,
    tree_to_dict,
)
from proxtree.spatialtree import _two_means

METRICS = [EUCLIDEAN, Metric.minkowski(1), Metric.minkowski(3), Metric.minkowski(math.inf)]


def cfg(kind="kd", spill=0.0, leaf=4, mode="duplicate", seed=0):
    return TreeConfig(SplitRule(kind), spill, leaf, mode, seed)


def test_line_example():
    X = np.arange(8, dtype=float)[:, None]
    t = build_tree(X, EUCLIDEAN, cfg("kd", leaf=2))
    assert t.depth == 2
    assert sorted(sorted(l.indices.tolist()) for l in t.leaves()) == [[0, 1], [2, 3], [4, 5], [6, 7]]
    left = t.nodes[t.root.left]
    assert left.size == 4
    assert sorted(X[i, 0] for l in t.leaves() if t.path_to_root(l.id)[-2] == left.id for i in l.indices) == [0, 1, 2, 3]


def test_single_point_is_a_leaf():
    t = build_tree([[1.0, 2.0]])
    assert len(t.nodes) == 1 and t.root.is_leaf and t.root.indices.tolist() == [0]


def test_errors():
    with pytest.raises(ValueError):
        build_tree([[0.5, 0.5]], Metric.kl())
    with pytest.raises(EmptyDatasetError):
        build_tree(np.empty((0, 2)))
    with pytest.raises(ValueError):
        TreeConfig(spill_fraction=0.5)
    with pytest.raises(ValueError):
        SplitRule("ball")
    with pytest.raises(ValueError):
        defeatist_nns(build_tree([[0.0]]), [0.0], k=0)


def test_duplicate_points_stop_splitting():
    t = build_tree(np.ones((20, 3)), EUCLIDEAN, cfg(leaf=2))
    assert len(t.nodes) == 1 and len(t.root.indices) == 20


def test_pca_root_on_two_lines():
    X = generate("two_lines", {})
    w = build_tree(X, EUCLIDEAN, cfg("pca", leaf=2)).root.direction
    angle = math.acos(min(1.0, abs(w[0]) / np.linalg.norm(w)))
    assert angle < 1e-6


@pytest.mark.parametrize("kind", SPLIT_KINDS)
def test_defeatist_single_leaf_without_spill(kind, rng):
    X = rng.random((200, 3))
    t = build_tree(X, EUCLIDEAN, cfg(kind, leaf=8))
    for q in rng.random((20, 3)):
        r = defeatist_nns(t, q)
        assert r.leaves_visited == 1
        assert r.comparisons == len(t.nodes[r.leaf_ids[0]].indices)


@pytest.mark.parametrize("kind", SPLIT_KINDS)
@pytest.mark.parametrize("spill", [0.0, 0.1])
def test_query_in_dataset_finds_itself(kind, spill, rng):
    X = rng.random((150, 4))
    t = build_tree(X, EUCLIDEAN, cfg(kind, spill, leaf=5))
    for i in range(0, 150, 7):
        assert defeatist_nns(t, X[i]).result[0][1] == 0.0


@given(
    n=st.integers(1, 120), dim=st.integers(1, 6), kind=st.sampled_from(SPLIT_KINDS),
    spill=st.sampled_from([0.0, 0.05, 0.1, 0.3]), mode=st.sampled_from(SPILL_MODES),
    leaf=st.integers(1, 10), k=st.integers(1, 6), metric=st.sampled_from(METRICS),
    grid=st.booleans(), seed=st.integers(0, 2**31 - 1),
)
def test_comprehensive_is_exact(n, dim, kind, spill, mode, leaf, k, metric, grid, seed):
    r = np.random.default_rng(seed)
    X = r.integers(0, 5, (n, dim)).astype(float) if grid else r.normal(size=(n, dim))
    t = build_tree(X, metric, cfg(kind, spill, leaf, mode, seed))
    for q in r.normal(size=(3, dim)) * 2:
        assert comprehensive_nns(t, q, k).result == brute_nn(metric, q, X, k)


def test_comprehensive_far_query_and_full_k(rng):
    X = rng.random((100, 3))
    t = build_tree(X, EUCLIDEAN, cfg("rp", 0.05))
    q = np.array([100.0, -50.0, 30.0])
    assert comprehensive_nns(t, q, 3).result == brute_nn(EUCLIDEAN, q, X, 3)
    full = comprehensive_nns(t, X[0], 100)
    assert full.result == brute_nn(EUCLIDEAN, X[0], X, 100)


def test_pruning_saves_work(rng):
    X = rng.random((2000, 2))
    t = build_tree(X, EUCLIDEAN, cfg("kd", leaf=8))
    r = comprehensive_nns(t, rng.random(2))
    assert r.comparisons < 200
    assert comprehensive_nns(t, X[3], prune=False).comparisons == 2000


@given(n=st.integers(1, 150), dim=st.integers(1, 5), kind=st.sampled_from(SPLIT_KINDS),
       spill=st.sampled_from([0.0, 0.05, 0.1, 0.25]), leaf=st.integers(1, 9), seed=st.integers(0, 2**31 - 1))
def test_structure_invariants(n, dim, kind, spill, leaf, seed):
    r = np.random.default_rng(seed)
    X = r.normal(size=(n, dim))
    t = build_tree(X, EUCLIDEAN, cfg(kind, spill, leaf, seed=seed))
    counts = np.zeros(n, dtype=int)
    for l in t.leaves():
        counts[l.indices] += 1
    if spill == 0.0:
        assert (counts == 1).all()
    else:
        assert (counts >= 1).all()
    # recompute each node's index set from its leaves
    members = {}
    for node in reversed(t.nodes):
        members[node.id] = set(node.indices.tolist()) if node.is_leaf else members[node.left] | members[node.right]
    for node in t.nodes:
        pts = X[sorted(members[node.id])]
        assert (EUCLIDEAN.to_many(node.center, pts) <= node.radius + 1e-9).all()
        if node.is_leaf:
            continue
        assert np.linalg.norm(node.direction) == pytest.approx(1.0)
        L, R = members[node.left], members[node.right]
        assert L and R
        for i in members[node.id]:
            m = float(project(X[i], node.direction)) - node.threshold
            in_band = node.spill > 0 and abs(m) <= node.spill
            assert (i in L and i in R) == in_band
            assert (i in L) == (m <= 0 or in_band)


def test_kd_direction_is_max_variance_axis(rng):
    X = rng.normal(size=(300, 5)) * np.array([1, 3, 2, 0.5, 2.5])
    w = build_tree(X, EUCLIDEAN, cfg("kd")).root.direction
    spread = ((X - X.mean(0)) ** 2).sum(0)
    assert w.tolist() == np.eye(5)[np.argmax(spread)].tolist()


@given(dim=st.integers(1, 8), seed=st.integers(0, 2**31 - 1))
def test_power_iteration_residual(dim, seed):
    r = np.random.default_rng(seed)
    S = covariance(r.normal(size=(dim + 5, dim)) * r.random(dim))
    w = power_iteration(S, 100, 1e-9)
    assert np.linalg.norm(w) == pytest.approx(1.0)
    scale = np.linalg.norm(S)
    assert np.linalg.norm(S @ w - (w @ S @ w) * w) <= 1e-9 * scale + 1e-300
    assert w @ S @ w == pytest.approx(np.linalg.eigvalsh(S)[-1], rel=1e-8, abs=1e-12)


def test_two_means_threshold(rng):
    X = np.vstack([rng.normal(0, 1, (60, 3)), rng.normal(6, 1, (40, 3))])
    root = build_tree(X, EUCLIDEAN, cfg("twomeans")).root
    mu1, mu2 = _two_means(X, EUCLIDEAN, 25)
    w = (mu1 - mu2) / np.linalg.norm(mu1 - mu2)
    assert np.allclose(root.direction, w)
    assert root.threshold == pytest.approx(w @ (mu1 + mu2) / 2)


@pytest.mark.parametrize("kind", SPLIT_KINDS)
def test_build_is_deterministic(kind, rng):
    X = rng.random((300, 4))
    a, b = (build_tree(X, EUCLIDEAN, cfg(kind, 0.05, seed=9)) for _ in range(2))
    assert [l.indices.tolist() for l in a.leaves()] == [l.indices.tolist() for l in b.leaves()]


@pytest.mark.parametrize("kind", SPLIT_KINDS)
def test_spill_grows_total_leaf_size(kind, rng):
    X = rng.random((400, 3))
    totals = [sum(build_tree(X, EUCLIDEAN, cfg(kind, s, 8)).leaf_sizes()) for s in (0.0, 0.05, 0.1, 0.2)]
    assert totals == sorted(totals)


@given(n=st.integers(1, 500), leaf=st.integers(1, 16), seed=st.integers(0, 2**31 - 1))
def test_depth_bound(n, leaf, seed):
    X = np.random.default_rng(seed).random((n, 3))
    t = build_tree(X, EUCLIDEAN, cfg("kd", leaf=leaf))
    assert t.depth <= max(0, math.ceil(math.log2(n / leaf))) + 1


@pytest.mark.parametrize("kind", SPLIT_KINDS)
def test_defeatist_never_beats_brute(kind, rng):
    X = rng.random((300, 3))
    t = build_tree(X, EUCLIDEAN, cfg(kind, 0.05))
    for q in rng.random((40, 3)):
        assert defeatist_nns(t, q).result[0][1] >= brute_nn(EUCLIDEAN, q, X)[0][1]


def test_both_sides_mode_visits_band(rng):
    X = rng.random((500, 2))
    t = build_tree(X, EUCLIDEAN, cfg("kd", 0.2, 8, "both_sides"))
    assert sum(t.leaf_sizes()) == 500  # no duplication in this mode
    visits = [defeatist_nns(t, q).leaves_visited for q in rng.random((50, 2))]
    assert max(visits) > 1


def test_forest_with_one_tree_matches_defeatist(rng):
    X = rng.random((300, 3))
    c = cfg("rp", leaf=6)
    (tree,) = build_rp_forest(X, EUCLIDEAN, c, 1)
    for q in rng.random((30, 3)):
        a, b = forest_nns([tree], q, 2), defeatist_nns(tree, q, 2)
        assert a.result == b.result and a.comparisons == b.comparisons


def test_forest_recall_not_below_single_tree():
    r = np.random.default_rng(7)
    X, Q = r.random((1000, 4)), r.random((100, 4))
    forest = build_rp_forest(X, EUCLIDEAN, cfg("rp", leaf=10), 6)
    truth = [brute_nn(EUCLIDEAN, q, X)[0][0] for q in Q]
    one = np.mean([forest_nns(forest[:1], q).result[0][0] == t for q, t in zip(Q, truth)])
    many = np.mean([forest_nns(forest, q).result[0][0] == t for q, t in zip(Q, truth)])
    assert many >= one
    for i in (0, 10, 500):
        assert forest_nns(forest, X[i]).result[0] == (i, 0.0)


def test_forest_errors():
    with pytest.raises(ValueError):
        forest_nns([], [0.0])
    with pytest.raises(ValueError):
        build_rp_forest([[0.0]], EUCLIDEAN, cfg("kd"), 2)


def test_forest_trees_differ(rng):
    X = rng.random((200, 3))
    f = build_rp_forest(X, EUCLIDEAN, cfg("rp"), 3)
    dirs = [tuple(t.root.direction.round(12)) for t in f]
    assert len(set(dirs)) == 3


def test_serialisation_roundtrip(tmp_path, rng):
    X = rng.random((120, 3))
    t = build_tree(X, Metric.minkowski(3), cfg("pca", 0.1))
    path = tmp_path / "tree.json"
    save_tree(t, path)
    u = load_tree(path, X)
    assert tree_to_dict(u) == tree_to_dict(t)
    for q in rng.random((10, 3)):
        assert comprehensive_nns(u, q, 2).result == comprehensive_nns(t, q, 2).result
    with pytest.raises(ValueError):
        tree_from_dict(tree_to_dict(t), X[:10])
    bad = tree_to_dict(t)
    bad["format"] = "other"
    with pytest.raises(ValueError):
        tree_from_dict(bad, X)
