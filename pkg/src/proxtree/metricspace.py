"""Points, datasets, distance functions and brute-force oracles.

Everything else in the package is checked against the exhaustive scans
defined here, so they are kept deliberately simple.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

KL_SUM_TOL = 1e-9


class DimensionMismatch(ValueError):
    """Two points (or a point and a dataset) have different dimensions."""


class DomainError(ValueError):
    """Input lies outside the domain of the selected distance."""


class EmptyDatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Metric:
    """Tagged distance functional.

    ``kind`` is one of ``"minkowski"``, ``"euclidean"`` or ``"kl"``.
    ``p`` is only meaningful for Minkowski.
    """

    kind: str
    p: float = 2.0

    def __post_init__(self):
        if self.kind not in ("minkowski", "euclidean", "kl"):
            raise ValueError(f"unknown metric kind {self.kind!r}")
        if self.kind == "minkowski" and not (self.p >= 1.0):
            raise ValueError(f"Minkowski order must be >= 1, got {self.p}")

    @classmethod
    def euclidean(cls) -> "Metric":
        return cls("euclidean", 2.0)

    @classmethod
    def minkowski(cls, p: float) -> "Metric":
        return cls("minkowski", float(p))

    @classmethod
    def kl(cls) -> "Metric":
        return cls("kl", 1.0)

    @classmethod
    def parse(cls, text: str) -> "Metric":
        """Parse ``euclidean``, ``kl`` or ``minkowski:<p>``."""
        text = text.strip().lower()
        if text == "euclidean":
            return cls.euclidean()
        if text == "kl":
            return cls.kl()
        if text.startswith("minkowski:"):
            try:
                p = float(text.split(":", 1)[1])
            except ValueError:
                raise ValueError(f"bad Minkowski order in {text!r}") from None
            return cls.minkowski(p)
        raise ValueError(f"unknown metric {text!r}")

    @property
    def is_true_metric(self) -> bool:
        return self.kind != "kl"

    @property
    def order(self) -> float:
        """Minkowski order (2 for Euclidean)."""
        return 2.0 if self.kind == "euclidean" else self.p

    def dual_order(self) -> float:
        """Hoelder conjugate of the Minkowski order (inf for p == 1)."""
        p = self.order
        if p == 1.0:
            return math.inf
        if math.isinf(p):
            return 1.0
        return p / (p - 1.0)

    def to_many(self, q: np.ndarray, P: np.ndarray) -> np.ndarray:
        """Distances from ``q`` to every row of ``P``."""
        if P.ndim != 2 or P.shape[1] != q.shape[0]:
            raise DimensionMismatch(f"query has dimension {q.shape[0]}, data has {P.shape[-1]}")
        if self.kind == "kl":
            _check_kl(q)
            _check_kl(P)
            return np.sum(q * np.log(q / P), axis=1)
        diff = np.abs(P - q)
        if self.kind == "euclidean":
            return np.sqrt(np.sum(diff * diff, axis=1))
        p = self.p
        if p == 1.0:
            return np.sum(diff, axis=1)
        if p == 2.0:
            return np.sqrt(np.sum(diff * diff, axis=1))
        if math.isinf(p):
            return np.max(diff, axis=1)
        return np.sum(diff**p, axis=1) ** (1.0 / p)

    def __call__(self, a, b) -> float:
        return distance(self, a, b)


EUCLIDEAN = Metric.euclidean()


def _check_kl(arr: np.ndarray) -> None:
    if np.any(arr <= 0):
        raise DomainError("KL divergence needs strictly positive coordinates")
    sums = arr.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > KL_SUM_TOL):
        raise DomainError("KL divergence needs probability vectors summing to 1")


def as_point(x, dim: Optional[int] = None) -> np.ndarray:
    q = np.asarray(x, dtype=np.float64)
    if q.ndim != 1 or q.shape[0] < 1:
        raise ValueError("a point is a non-empty 1-D coordinate vector")
    if not np.all(np.isfinite(q)):
        raise ValueError("point coordinates must be finite")
    if dim is not None and q.shape[0] != dim:
        raise DimensionMismatch(f"expected dimension {dim}, got {q.shape[0]}")
    return q


@dataclass(frozen=True, eq=False)
class PointSet:
    """Ordered points with optional integer labels and colors."""

    points: np.ndarray
    labels: Optional[np.ndarray] = None
    colors: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1) if pts.size else pts.reshape(0, 1)
        if pts.ndim != 2:
            raise ValueError("points must be a 2-D array of shape (n, D)")
        if pts.shape[1] < 1:
            raise ValueError("dimension must be at least 1")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        for name in ("labels", "colors"):
            val = getattr(self, name)
            if val is None:
                continue
            arr = np.array(val, dtype=np.int64)
            if arr.shape != (pts.shape[0],):
                raise ValueError(f"{name} must have one entry per point")
            if np.any(arr < 0):
                raise ValueError(f"{name} must be natural numbers")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def subset(self, indices: Sequence[int]) -> "PointSet":
        idx = np.asarray(indices, dtype=np.int64)
        return PointSet(
            self.points[idx],
            None if self.labels is None else self.labels[idx],
            None if self.colors is None else self.colors[idx],
        )

    def with_colors(self, colors) -> "PointSet":
        return PointSet(self.points, self.labels, colors)


def as_pointset(X) -> PointSet:
    return X if isinstance(X, PointSet) else PointSet(X)


def distance(metric: Metric, a, b) -> float:
    a = as_point(a)
    b = as_point(b, a.shape[0])
    return float(metric.to_many(a, b[None, :])[0])


def ranked(dists: np.ndarray, indices: np.ndarray) -> np.ndarray:
    """Order positions by (distance, index)."""
    return np.lexsort((indices, dists))


def brute_nn(metric: Metric, q, X, k: int = 1) -> list[tuple[int, float]]:
    """The ``k`` nearest points of ``X`` to ``q``, ties broken by index."""
    X = as_pointset(X)
    if len(X) == 0:
        raise EmptyDatasetError("brute_nn needs a non-empty dataset")
    if k < 1:
        raise ValueError("k must be >= 1")
    q = as_point(q, X.dim)
    d = metric.to_many(q, X.points)
    order = ranked(d, np.arange(len(X)))[:k]
    return [(int(i), float(d[i])) for i in order]


def brute_fn(metric: Metric, q, X) -> tuple[int, float]:
    """Farthest point of ``X`` from ``q``.

    The returned distance is the radius of the smallest ball centred at
    ``q`` that encloses ``X``.
    """
    X = as_pointset(X)
    if len(X) == 0:
        raise EmptyDatasetError("brute_fn needs a non-empty dataset")
    q = as_point(q, X.dim)
    d = metric.to_many(q, X.points)
    i = int(np.argmax(d))  # first maximum, i.e. smallest index on ties
    return i, float(d[i])
