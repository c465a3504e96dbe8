"""Quality measures for approximate neighbor answers."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from ..metricspace import EUCLIDEAN, Metric, as_point, as_pointset, ranked


def true_ranks(q, X, metric: Metric = EUCLIDEAN, exclude: Sequence[int] = ()) -> np.ndarray:
    """1-based rank of every point of ``X`` in the exact ordering around ``q``.

    Excluded points get rank 0 and do not occupy a rank.
    """
    X = as_pointset(X)
    q = as_point(q, X.dim)
    d = metric.to_many(q, X.points)
    order = ranked(d, np.arange(len(X)))
    if len(exclude):
        order = order[~np.isin(order, np.asarray(exclude))]
    ranks = np.zeros(len(X), dtype=np.int64)
    ranks[order] = np.arange(1, len(order) + 1)
    return ranks


def rank_ratio(ranks: np.ndarray, returned: Sequence[int]) -> float:
    """``(1 + ... + k) / (sum of true ranks of the k returned points)``."""
    returned = [int(i) for i in returned]
    if not returned:
        raise ValueError("rank ratio of an empty answer")
    if len(set(returned)) != len(returned):
        raise ValueError("returned indices must be distinct")
    n = len(ranks)
    for i in returned:
        if not 0 <= i < n or ranks[i] == 0:
            raise IndexError(f"returned index {i} is not a rankable point")
    k = len(returned)
    return k * (k + 1) / 2 / float(sum(int(ranks[i]) for i in returned))


def recall_at_k(ranks: np.ndarray, returned: Sequence[int], k: int) -> float:
    """Fraction of the true ``k`` nearest points present in ``returned``."""
    hits = sum(1 for i in returned if 0 < ranks[int(i)] <= k)
    return hits / k
