"""Potential functions that measure how hard exact nearest-neighbor search is.

For a query ``q`` with sorted neighbor distances ``d1 <= d2 <= ...`` the
single-query potential averages the ratios ``d1 / di``. Values near 1 mean
everything is about equally far (hard), values near 0 mean the nearest
neighbor stands out (easy). Batch variants add a term for the spread of the
query set.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .metricspace import EUCLIDEAN, EmptyDatasetError, Metric, as_point, as_pointset, ranked

VARIANTS = ("phi_n", "phi_m", "phi_km")
PHI2_RULES = ("mean_interpoint", "diameter")


@dataclass
class PotentialReport:
    phi: float
    n_terms: int
    variant: str
    k: int = 1
    m: Optional[int] = None
    phi1: Optional[float] = None
    phi2: Optional[float] = None
    phi2_rule: Optional[str] = None
    product: Optional[float] = None
    log_bound: Optional[float] = None  # phi1 * phi2 * log(1/phi1) when phi1 is in (0, 1)


@dataclass
class ScheduleStep:
    query: int
    neighbors: list[tuple[int, float]]
    score: float
    phi2: float


def _ratio_terms(num: float, den: np.ndarray) -> np.ndarray:
    """``num / den`` with 0/0 read as 1 (coincident points)."""
    out = np.ones_like(den)
    nz = den > 0
    out[nz] = num / den[nz]
    return out


def phi(q, X, metric: Metric = EUCLIDEAN, variant: str = "phi_n", k: int = 1, m: Optional[int] = None) -> PotentialReport:
    """Single-query potential.

    ``phi_n`` is ``(1/n) sum_{i=2..n} d1/di``. ``phi_m`` keeps the first
    ``m`` neighbors, ``(1/m) sum_{i=2..m} d1/di``. ``phi_km`` replaces
    ``d1`` by the mean of the first ``k`` distances and sums ``i = k+1..m``,
    still dividing by ``m``.
    """
    X = as_pointset(X)
    n = len(X)
    q = as_point(q, X.dim)
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    if variant == "phi_n":
        if n < 2:
            raise EmptyDatasetError("phi_n needs at least two reference points")
        k, m = 1, n
    else:
        if variant == "phi_m":
            k = 1
        if m is None:
            m = n
        if not 1 <= k < m <= n:
            raise ValueError(f"need 1 <= k < m <= n, got k={k}, m={m}, n={n}")
    d = metric.to_many(q, X.points)
    d = d[ranked(d, np.arange(n))][:m]
    num = float(d[:k].mean())
    terms = _ratio_terms(num, d[k:])
    return PotentialReport(float(terms.sum() / m), len(terms), variant, k, m)


def phi2(Q, metric: Metric = EUCLIDEAN, rule: str = "mean_interpoint") -> float:
    """Spread of a query set: ``sum_{i<j} d(qi, qj) / n^2`` or the diameter."""
    if rule not in PHI2_RULES:
        raise ValueError(f"unknown phi2 rule {rule!r}; expected one of {PHI2_RULES}")
    Q = as_pointset(Q)
    n = len(Q)
    if n < 2:
        return 0.0
    total, top = 0.0, 0.0
    for i in range(n - 1):
        d = metric.to_many(Q.points[i], Q.points[i + 1:])
        total += float(d.sum())
        top = max(top, float(d.max()))
    return total / n**2 if rule == "mean_interpoint" else top


def _log_term(p1: float, p2: float) -> Optional[float]:
    if 0.0 < p1 < 1.0:
        return p1 * p2 * math.log(1.0 / p1)
    return None


def batch_phi(Q, X, metric: Metric = EUCLIDEAN, k: int = 1, m: Optional[int] = None,
              phi2_rule: str = "mean_interpoint") -> PotentialReport:
    """Batch potential: ``phi1`` sums ``phi_km`` over the queries, ``phi2`` measures their spread."""
    Q = as_pointset(Q)
    X = as_pointset(X)
    if len(Q) < 1:
        raise EmptyDatasetError("query set is empty")
    if len(X) < 2:
        raise EmptyDatasetError("need at least two reference points")
    m = len(X) if m is None else m
    per = [phi(q, X, metric, "phi_km", k, m) for q in Q.points]
    p1 = float(sum(r.phi for r in per))
    p2 = phi2(Q, metric, phi2_rule)
    return PotentialReport(
        phi=p1, n_terms=sum(r.n_terms for r in per), variant="phi_km", k=k, m=m,
        phi1=p1, phi2=p2, phi2_rule=phi2_rule, product=p1 * p2, log_bound=_log_term(p1, p2),
    )


def query_score(phi_q: float, spread: float) -> float:
    """``phi * spread * log(1/phi)``, taking its limit 0 at phi = 0."""
    if phi_q <= 0.0:
        return 0.0
    return phi_q * spread * math.log(1.0 / phi_q)


def batch_schedule(Q, X, metric: Metric = EUCLIDEAN, k: int = 1, m: Optional[int] = None,
                   phi2_rule: str = "diameter") -> list[ScheduleStep]:
    """Answer queries one at a time, always taking the lowest-scoring remaining one next.

    The score of ``q`` is ``phi_km(q) * phi2(R - {q}) * log(1/phi_km(q))``
    where ``R`` is the set of queries not yet answered. Ties go to the
    smallest index. Each chosen query is answered by a linear scan.
    """
    Q = as_pointset(Q)
    X = as_pointset(X)
    if len(Q) < 1:
        raise EmptyDatasetError("query set is empty")
    if phi2_rule not in PHI2_RULES:
        raise ValueError(f"unknown phi2 rule {phi2_rule!r}; expected one of {PHI2_RULES}")
    m = len(X) if m is None else m
    if len(X) < 2:
        raise EmptyDatasetError("need at least two reference points")
    if not 1 <= k <= len(X):
        raise ValueError("k must be between 1 and the number of reference points")
    phis = [phi(q, X, metric, "phi_km", k, m).phi for q in Q.points]
    P = np.stack([metric.to_many(x, Q.points) for x in Q.points])
    remaining = list(range(len(Q)))
    steps: list[ScheduleStep] = []
    while remaining:
        R = np.array(remaining)
        sub = P[np.ix_(R, R)]
        r = len(R)
        best = None
        for pos, i in enumerate(remaining):
            if r < 3:
                spread = 0.0
            elif phi2_rule == "mean_interpoint":
                spread = (sub.sum() / 2.0 - sub[pos].sum()) / (r - 1) ** 2
            else:
                keep = np.arange(r) != pos
                spread = float(sub[np.ix_(keep, keep)].max())
            cand = (query_score(phis[i], spread), i, float(spread))
            if best is None or cand[:2] < best[:2]:
                best = cand
        score, i, spread = best
        remaining.remove(i)
        d = metric.to_many(Q.points[i], X.points)
        order = ranked(d, np.arange(len(X)))[:k]
        steps.append(ScheduleStep(i, [(int(j), float(d[j])) for j in order], score, spread))
    return steps
