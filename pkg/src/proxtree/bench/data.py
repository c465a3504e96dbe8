"""Dataset ingestion, synthetic generators and Johnson-Lindenstrauss projection."""
from __future__ import annotations

import csv
import io
import math
from typing import Any, Mapping, Optional

import numpy as np

from ..metricspace import PointSet


class DataError(ValueError):
    """Malformed or unusable input data."""


def ingest_csv(path, has_label: bool = False) -> PointSet:
    """Read comma-separated reals, one point per row, optional trailing integer label.

    Header rows are not supported; any non-numeric cell is an error that
    names its line.
    """
    rows: list[list[float]] = []
    labels: list[int] = []
    width = None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if width is None:
                width = len(row)
                if has_label and width < 2:
                    raise DataError(f"line {lineno}: a labelled row needs a coordinate and a label")
            elif len(row) != width:
                raise DataError(f"line {lineno}: expected {width} fields, got {len(row)}")
            cells = row[:-1] if has_label else row
            try:
                rows.append([float(c) for c in cells])
            except ValueError:
                raise DataError(f"line {lineno}: non-numeric cell in {row!r}") from None
            if has_label:
                try:
                    labels.append(int(row[-1]))
                except ValueError:
                    raise DataError(f"line {lineno}: label {row[-1]!r} is not an integer") from None
    if not rows:
        raise DataError(f"{path}: no data rows")
    pts = np.array(rows, dtype=float)
    if not np.all(np.isfinite(pts)):
        raise DataError(f"{path}: non-finite coordinate")
    return PointSet(pts, np.array(labels) if has_label else None)


def format_csv(X: PointSet) -> str:
    """CSV text in the layout :func:`ingest_csv` reads back; labels go last."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for i, p in enumerate(X.points):
        row = [repr(float(v)) for v in p]
        if X.labels is not None:
            row.append(str(int(X.labels[i])))
        w.writerow(row)
    return buf.getvalue()


def write_csv(path, X: PointSet) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(format_csv(X))


GENERATORS = ("uniform", "two_lines", "kd_adversarial")


def _int(params: Mapping[str, Any], key: str, default: int) -> int:
    v = int(params.get(key, default))
    if v < 1:
        raise ValueError(f"{key} must be >= 1, got {v}")
    return v


def generate(name: str, params: Optional[Mapping[str, Any]] = None, seed: int = 0) -> PointSet:
    """Synthetic datasets.

    ``uniform``: ``n`` points uniform in ``[0,1]^D``.
    ``two_lines``: ``nA`` points ``(2i, 0)`` and ``nB`` points ``(j, 4)``,
    labelled by line. The default ``nB = 2*nA - 1`` gives both lines the
    same mean x, so the covariance is axis aligned.
    ``kd_adversarial``: point 0 is all ones; every other point is uniform
    with one random coordinate raised to ``M``.
    """
    params = dict(params or {})
    rng = np.random.default_rng(seed)
    if name == "uniform":
        n, D = _int(params, "n", 100), _int(params, "D", 2)
        return PointSet(rng.random((n, D)))
    if name == "two_lines":
        nA = _int(params, "nA", 50)
        nB = _int(params, "nB", 2 * nA - 1)
        A = np.column_stack([2.0 * np.arange(nA), np.zeros(nA)])
        B = np.column_stack([np.arange(nB, dtype=float), np.full(nB, 4.0)])
        return PointSet(np.vstack([A, B]), np.r_[np.zeros(nA, dtype=np.int64), np.ones(nB, dtype=np.int64)])
    if name == "kd_adversarial":
        n, D = _int(params, "n", 100), _int(params, "D", 2)
        M = float(params.get("M", 100.0))
        P = rng.random((n, D))
        P[0] = 1.0
        if n > 1:
            P[np.arange(1, n), rng.integers(0, D, size=n - 1)] = M
        return PointSet(P)
    raise ValueError(f"unknown generator {name!r}; expected one of {GENERATORS}")


PAIR_SAMPLE = 10_000


def jl_project(X, d_target: int, seed: int = 0, identity: bool = False) -> tuple[PointSet, float]:
    """Random Gaussian map to ``d_target`` dimensions, entries N(0, 1/d_target).

    Returns the projected points and the largest relative change of a
    squared pairwise distance, ``max |d'^2/d^2 - 1|``, over all pairs (or a
    sample of ``PAIR_SAMPLE`` pairs for large inputs). ``identity`` swaps
    the random map for the identity, which needs ``d_target == D``.
    """
    X = X if isinstance(X, PointSet) else PointSet(X)
    n, D = X.points.shape
    if not 1 <= d_target <= D:
        raise ValueError(f"need 1 <= d_target <= {D}, got {d_target}")
    rng = np.random.default_rng(seed)
    if identity:
        if d_target != D:
            raise ValueError("the identity map needs d_target == D")
        A = np.eye(D)
    else:
        A = rng.standard_normal((D, d_target)) / math.sqrt(d_target)
    Y = X.points @ A
    if n * (n - 1) // 2 <= PAIR_SAMPLE:
        i, j = np.triu_indices(n, 1)
    else:
        i = rng.integers(0, n, size=PAIR_SAMPLE)
        j = rng.integers(0, n, size=PAIR_SAMPLE)
        keep = i != j
        i, j = i[keep], j[keep]
    before = np.sum((X.points[i] - X.points[j]) ** 2, axis=1)
    after = np.sum((Y[i] - Y[j]) ** 2, axis=1)
    ok = before > 0
    distortion = float(np.max(np.abs(after[ok] / before[ok] - 1.0))) if ok.any() else 0.0
    return PointSet(Y, X.labels, X.colors), distortion
