import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from proxtree.metricspace import (
    EUCLIDEAN,
    DimensionMismatch,
    DomainError,
    EmptyDatasetError,
    Metric,
    PointSet,
    brute_fn,
    brute_nn,
    distance,
)

coords = st.floats(-100, 100, allow_nan=False, allow_infinity=False)


def vec(dim):
    return arrays(np.float64, dim, elements=coords)


def test_minkowski1_example():
    assert distance(Metric.minkowski(1), [0, 0], [1, 2]) == 3.0


def test_euclidean_example():
    assert distance(EUCLIDEAN, [0, 0], [3, 4]) == 5.0


def test_kl_identity():
    assert distance(Metric.kl(), [0.5, 0.5], [0.5, 0.5]) == 0.0


def test_kl_domain_errors():
    with pytest.raises(DomainError):
        distance(Metric.kl(), [1.0, 0.0], [0.5, 0.5])
    with pytest.raises(DomainError):
        distance(Metric.kl(), [0.6, 0.6], [0.5, 0.5])


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        distance(EUCLIDEAN, [0, 0], [1, 2, 3])


def test_kl_is_not_a_metric():
    assert not Metric.kl().is_true_metric
    assert EUCLIDEAN.is_true_metric and Metric.minkowski(3).is_true_metric


@pytest.mark.parametrize("text,kind,p", [
    ("euclidean", "euclidean", 2.0), ("kl", "kl", 1.0), ("minkowski:1", "minkowski", 1.0),
    ("minkowski:inf", "minkowski", math.inf), ("Minkowski:3.5", "minkowski", 3.5),
])
def test_parse(text, kind, p):
    m = Metric.parse(text)
    assert (m.kind, m.p) == (kind, p)


@pytest.mark.parametrize("text", ["cosine", "minkowski:x", "minkowski:0.5"])
def test_parse_rejects(text):
    with pytest.raises(ValueError):
        Metric.parse(text)


def test_dual_orders():
    assert Metric.minkowski(1).dual_order() == math.inf
    assert Metric.minkowski(math.inf).dual_order() == 1.0
    assert EUCLIDEAN.dual_order() == 2.0
    assert Metric.minkowski(3).dual_order() == pytest.approx(1.5)


@given(st.integers(1, 6).flatmap(lambda d: st.tuples(vec(d), vec(d))))
def test_euclidean_equals_minkowski2(ab):
    a, b = ab
    assert abs(distance(EUCLIDEAN, a, b) - distance(Metric.minkowski(2), a, b)) <= 1e-12


@pytest.mark.parametrize("metric", [EUCLIDEAN, Metric.minkowski(1), Metric.minkowski(3), Metric.minkowski(math.inf)])
@given(st.integers(1, 5).flatmap(lambda d: st.tuples(vec(d), vec(d), vec(d))))
def test_metric_axioms(metric, abc):
    a, b, c = abc
    dab, dbc, dac = distance(metric, a, b), distance(metric, b, c), distance(metric, a, c)
    assert dab >= 0
    assert distance(metric, a, a) == 0
    assert dab == pytest.approx(distance(metric, b, a), rel=1e-12, abs=1e-12)
    assert dab + dbc >= dac - 1e-9


@given(st.integers(2, 6).flatmap(
    lambda d: st.tuples(arrays(np.float64, d, elements=st.floats(0.01, 1)),
                        arrays(np.float64, d, elements=st.floats(0.01, 1)))))
def test_gibbs_inequality(pq):
    p, q = (v / v.sum() for v in pq)
    # renormalise once more so the sums pass the 1e-9 check
    p, q = p / p.sum(), q / q.sum()
    d = distance(Metric.kl(), p, q)
    assert d >= -1e-12
    assert distance(Metric.kl(), p, p) == pytest.approx(0.0, abs=1e-12)


def test_brute_nn_examples():
    X = [[0, 0], [3, 0], [0, 4]]
    assert brute_nn(EUCLIDEAN, [1, 0], X, 1) == [(0, 1.0)]
    assert brute_nn(EUCLIDEAN, [3, 0], X, 1) == [(1, 0.0)]
    assert brute_nn(EUCLIDEAN, [0, 0], [[1, 0], [0, 1]], 2) == [(0, 1.0), (1, 1.0)]


def test_brute_nn_k_larger_than_n():
    assert len(brute_nn(EUCLIDEAN, [0.0], [[1.0], [2.0]], 5)) == 2


def test_brute_empty():
    with pytest.raises(EmptyDatasetError):
        brute_nn(EUCLIDEAN, [0.0], np.empty((0, 1)))
    with pytest.raises(EmptyDatasetError):
        brute_fn(EUCLIDEAN, [0.0], np.empty((0, 1)))


def test_brute_fn_examples():
    assert brute_fn(EUCLIDEAN, [0, 0], [[1, 0], [5, 0], [2, 0]]) == (1, 5.0)
    assert brute_fn(EUCLIDEAN, [0, 0], [[2, 2]]) == (0, math.sqrt(8))
    angles = np.linspace(0, 2 * np.pi, 8, endpoint=False)
    circle = np.column_stack([np.cos(angles), np.sin(angles)])
    i, d = brute_fn(EUCLIDEAN, [0, 0], circle)
    assert d == pytest.approx(1.0)
    ties = np.flatnonzero(np.isclose(EUCLIDEAN.to_many(np.zeros(2), circle), d, rtol=0, atol=0))
    assert i == ties.min()


@given(st.integers(1, 30), st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_brute_nn_full_permutation(n, dim, seed):
    r = np.random.default_rng(seed)
    X = r.integers(0, 4, size=(n, dim)).astype(float)  # small grid, many ties
    q = r.integers(0, 4, size=dim).astype(float)
    res = brute_nn(EUCLIDEAN, q, X, n)
    idx = [i for i, _ in res]
    assert sorted(idx) == list(range(n))
    keys = [(d, i) for i, d in res]
    assert keys == sorted(keys)
    assert brute_fn(EUCLIDEAN, q, X)[1] == max(d for _, d in res)


def test_pointset_validation():
    with pytest.raises(ValueError):
        PointSet([[0.0, np.nan]])
    with pytest.raises(ValueError):
        PointSet([[0.0], [1.0]], labels=[1])
    with pytest.raises(ValueError):
        PointSet([[0.0], [1.0]], colors=[0, -1])
    X = PointSet([1.0, 2.0, 3.0], labels=[0, 1, 1])
    assert X.points.shape == (3, 1) and X.dim == 1
    assert not X.points.flags.writeable
    sub = X.subset([2, 0])
    assert sub.points[:, 0].tolist() == [3.0, 1.0] and sub.labels.tolist() == [1, 0]
