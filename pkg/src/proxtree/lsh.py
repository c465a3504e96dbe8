"""Locality-sensitive hashing for Euclidean data.

Two hash families are provided: the sign of a Gaussian projection and a
quantized shifted projection ``floor((g.x + b) / r)``. An index keeps ``L``
tables, each keyed by a ``k``-tuple of hashes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .metricspace import EUCLIDEAN, EmptyDatasetError, as_point, as_pointset
from .spatialtree import SearchReport

FAMILIES = ("signed", "quantized")


@dataclass(frozen=True)
class LshParams:
    family: str = "quantized"
    k: int = 4
    L: int = 8
    R: float = 1.0
    c: float = 2.0
    bucket_width: Optional[float] = None  # r; defaults to R
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown hash family {self.family!r}; expected one of {FAMILIES}")
        if self.k < 1 or self.L < 1:
            raise ValueError("k and L must be >= 1")
        if not self.R > 0:
            raise ValueError("R must be positive")
        if not self.c > 1:
            raise ValueError("c must exceed 1")
        if self.bucket_width is not None and not self.bucket_width > 0:
            raise ValueError("bucket width must be positive")

    @property
    def width(self) -> float:
        return self.R if self.bucket_width is None else self.bucket_width


@dataclass
class HashBank:
    """``count`` independent hash functions from one family."""

    family: str
    G: np.ndarray  # (count, D) Gaussian directions
    b: np.ndarray  # (count,) offsets in [0, r); unused for the signed family
    width: float

    def __call__(self, P: np.ndarray) -> np.ndarray:
        proj = np.atleast_2d(P) @ self.G.T
        if self.family == "signed":
            return (proj >= 0.0).astype(np.int64)
        return np.floor((proj + self.b) / self.width).astype(np.int64)


def sample_hashes(family: str, dim: int, count: int, width: float, rng: np.random.Generator) -> HashBank:
    G = rng.standard_normal((count, dim))
    b = rng.uniform(0.0, width, size=count)
    return HashBank(family, G, b, width)


@dataclass
class LshIndex:
    params: LshParams
    hashes: HashBank  # L*k functions; table j uses rows j*k .. j*k + k - 1
    tables: list[dict[tuple, list[int]]] = field(default_factory=list)
    points: Optional[np.ndarray] = None

    def keys(self, P: np.ndarray) -> np.ndarray:
        """Hash keys with shape (n, L, k)."""
        H = self.hashes(P)
        return H.reshape(H.shape[0], self.params.L, self.params.k)


def lsh_build(X, params: LshParams) -> LshIndex:
    X = as_pointset(X)
    if len(X) == 0:
        raise EmptyDatasetError("cannot hash an empty dataset")
    rng = np.random.default_rng(params.seed)
    bank = sample_hashes(params.family, X.dim, params.L * params.k, params.width, rng)
    index = LshIndex(params, bank, [dict() for _ in range(params.L)], X.points)
    keys = index.keys(X.points)
    for i in range(len(X)):
        for j in range(params.L):
            index.tables[j].setdefault(tuple(keys[i, j].tolist()), []).append(i)
    return index


def lsh_query(index: LshIndex, q, exclude: Iterable[int] = ()) -> SearchReport:
    """First point within ``c*R`` found by scanning the buckets of ``q`` table by table.

    ``result`` is empty when no such point exists in any probed bucket.
    Indices in ``exclude`` are never checked.
    """
    q = as_point(q, index.points.shape[1])
    p = index.params
    limit = p.c * p.R
    keys = index.keys(q[None, :])[0]
    report = SearchReport([])
    seen: set[int] = set(int(i) for i in exclude)
    for j in range(p.L):
        bucket = index.tables[j].get(tuple(keys[j].tolist()), [])
        report.leaves_visited += 1
        fresh = [i for i in bucket if i not in seen]
        if not fresh:
            continue
        seen.update(fresh)
        d = EUCLIDEAN.to_many(q, index.points[fresh])
        for i, dist in zip(fresh, d.tolist()):
            report.comparisons += 1
            if dist <= limit:
                report.result = [(i, dist)]
                return report
    return report


def collision_rate(family: str, a, b, width: float = 1.0, trials: int = 10_000, seed: int = 0) -> float:
    """Monte Carlo estimate of Pr[h(a) == h(b)] for one hash drawn from ``family``."""
    a = as_point(a)
    b = as_point(b, a.shape[0])
    bank = sample_hashes(family, a.shape[0], trials, width, np.random.default_rng(seed))
    H = bank(np.vstack([a, b]))
    return float(np.mean(H[0] == H[1]))
