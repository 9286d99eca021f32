"""Correlation, quantile and histogram statistics used by the reports."""

from __future__ import annotations

import math

import numpy as np

from agentimp.errors import AgentImpError

QUANTILES = (0, 30, 50, 80, 90, 100)


class UndefinedStatistic(AgentImpError, ValueError):
    """The statistic does not exist for this input (e.g. constant data)."""


def _pair(xs, ys):
    x = np.asarray(xs, dtype=np.float64).ravel()
    y = np.asarray(ys, dtype=np.float64).ravel()
    if x.size != y.size:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 2:
        raise UndefinedStatistic("correlation needs at least two points")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise ValueError("correlation inputs must be finite")
    return x, y


def pearson(xs, ys) -> float:
    x, y = _pair(xs, ys)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedStatistic("correlation is undefined for constant input")
    r = float(np.dot(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def r_squared(xs, ys) -> float:
    """Coefficient of determination of the least-squares line of ys on xs."""
    x, y = _pair(xs, ys)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedStatistic("R^2 is undefined for constant input")
    sxy = float(np.dot(dx, dy))
    # explained / total sum of squares for the OLS fit; equals r^2 algebraically
    return min(1.0, (sxy * sxy / sxx) / syy)


def rankdata(values) -> np.ndarray:
    """Average ranks (1-based), ties share the mean rank."""
    v = np.asarray(values, dtype=np.float64)
    order = np.argsort(v, kind="mergesort")
    ranks = np.empty(v.size)
    sv = v[order]
    start = 0
    while start < v.size:
        stop = start
        while stop + 1 < v.size and sv[stop + 1] == sv[start]:
            stop += 1
        ranks[order[start:stop + 1]] = (start + stop) / 2.0 + 1.0
        start = stop + 1
    return ranks


def spearman(xs, ys) -> float:
    x, y = _pair(xs, ys)
    return pearson(rankdata(x), rankdata(y))


def quantile_nearest_rank(values, q: float) -> float:
    """Nearest-rank quantile: the ceil(q/100 * n)-th smallest value (q=0 gives the minimum)."""
    v = np.sort(np.asarray(values, dtype=np.float64).ravel())
    if v.size == 0:
        raise ValueError("quantile of empty data")
    if not 0 <= q <= 100:
        raise ValueError(f"quantile {q} outside [0, 100]")
    k = max(1, math.ceil(q / 100.0 * v.size))
    return float(v[k - 1])


def quantiles(values, qs=QUANTILES) -> list[float]:
    return [quantile_nearest_rank(values, q) for q in qs]


def histogram(values, bins: int, domain: tuple[float, float]) -> dict:
    """Counts over ``bins`` equal-width bins covering ``domain``.

    Bins are lower-inclusive and upper-exclusive except the last, which also
    includes the upper domain edge. Values outside the domain are counted in
    ``underflow`` / ``overflow``, never dropped.
    """
    lo, hi = float(domain[0]), float(domain[1])
    if bins < 1:
        raise ValueError("bins must be >= 1")
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        raise ValueError(f"empty histogram domain {domain}")
    edges = np.linspace(lo, hi, bins + 1)
    v = np.asarray(values, dtype=np.float64).ravel()
    if not np.isfinite(v).all():
        raise ValueError("histogram values must be finite")
    counts = np.zeros(bins, dtype=np.int64)
    under = int((v < lo).sum())
    over = int((v > hi).sum())
    inside = v[(v >= lo) & (v <= hi)]
    idx = np.searchsorted(edges, inside, side="right") - 1
    idx = np.minimum(idx, bins - 1)
    np.add.at(counts, idx, 1)
    return {"edges": edges, "counts": counts, "underflow": under, "overflow": over}
