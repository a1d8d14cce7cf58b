"""Sorted disjoint unions of scale intervals and the propertime integral.

The admissible set of a loop is expressed in the scale variable s = sqrt(T).
With T = s^2 the weight dT/T^3 becomes 2 ds / s^5, so the integral over an
interval [s_lo, s_hi] is (s_lo^-4 - s_hi^-4) / 2 in closed form.
"""

from __future__ import annotations

import math

import numpy as np

INF = math.inf


class ScaleSetError(Exception):
    """Raised for admissible sets over which the propertime integral diverges."""


class IntervalUnion:
    """Immutable sorted union of disjoint half-open-at-infinity s-intervals."""

    __slots__ = ("intervals",)

    def __init__(self, intervals=(), merged: bool = False):
        ivs = [(float(lo), float(hi)) for lo, hi in intervals]
        for lo, hi in ivs:
            if math.isnan(lo) or math.isnan(hi):
                raise ValueError("NaN interval endpoint")
            if not 0.0 <= lo < hi:
                raise ValueError(f"bad interval ({lo}, {hi})")
        if not merged:
            ivs = _merge(ivs)
        self.intervals = tuple(ivs)

    @classmethod
    def empty(cls) -> "IntervalUnion":
        return cls((), merged=True)

    @classmethod
    def single(cls, lo: float, hi: float = INF) -> "IntervalUnion":
        if not lo < hi:
            return cls.empty()
        return cls(((lo, hi),), merged=True)

    def __bool__(self) -> bool:
        return bool(self.intervals)

    def __eq__(self, other) -> bool:
        return isinstance(other, IntervalUnion) and self.intervals == other.intervals

    def __hash__(self):
        return hash(self.intervals)

    def __repr__(self) -> str:
        body = ", ".join(f"[{lo:g}, {hi:g})" for lo, hi in self.intervals)
        return f"IntervalUnion({body})"

    def union(self, other: "IntervalUnion") -> "IntervalUnion":
        return IntervalUnion(list(self.intervals) + list(other.intervals))

    def intersect(self, other: "IntervalUnion") -> "IntervalUnion":
        out = []
        a, b = self.intervals, other.intervals
        i = j = 0
        while i < len(a) and j < len(b):
            lo = max(a[i][0], b[j][0])
            hi = min(a[i][1], b[j][1])
            if lo < hi:
                out.append((lo, hi))
            if a[i][1] <= b[j][1]:
                i += 1
            else:
                j += 1
        return IntervalUnion(out, merged=True)

    def scaled(self, factor: float) -> "IntervalUnion":
        if factor <= 0:
            raise ValueError("scale factor must be positive")
        return IntervalUnion([(lo * factor, hi * factor)
                              for lo, hi in self.intervals], merged=True)

    def contains(self, s: float) -> bool:
        for lo, hi in self.intervals:
            if lo <= s < hi:
                return True
        return False


def _merge(ivs: list[tuple[float, float]]) -> list[tuple[float, float]]:
    if not ivs:
        return []
    ivs.sort()
    out = [ivs[0]]
    for lo, hi in ivs[1:]:
        plo, phi = out[-1]
        if lo <= phi:
            if hi > phi:
                out[-1] = (plo, hi)
        else:
            out.append((lo, hi))
    return out


def union_all(sets) -> IntervalUnion:
    acc: list[tuple[float, float]] = []
    for s in sets:
        acc.extend(s.intervals)
    return IntervalUnion(acc)


def propertime_integral(scale_set: IntervalUnion) -> float:
    """Exact integral of dT/T^3 over {T = s^2 : s in the set}.

    Each interval contributes (s_lo^-4 - s_hi^-4)/2; an unbounded upper end
    contributes nothing.  A lower endpoint of zero makes the integral
    diverge and flags a degenerate configuration.
    """
    total = 0.0
    for lo, hi in scale_set.intervals:
        if lo == 0.0:
            raise ScaleSetError("admissible set reaches s=0; integral diverges")
        top = 0.0 if math.isinf(hi) else hi ** -4
        total += 0.5 * (lo ** -4 - top)
    return total


def grid_interval_union(mask: np.ndarray, s_grid: np.ndarray,
                        tail: bool = False) -> IntervalUnion:
    """Interval union from a Boolean mask sampled on a scale grid.

    Consecutive True runs become intervals spanning the touched grid cells.
    If ``tail`` is set and the last grid point is inside the set, the final
    interval is extended to infinity.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != s_grid.shape:
        raise ValueError("mask and grid shapes differ")
    ivs = []
    n = mask.size
    i = 0
    while i < n:
        if mask[i]:
            j = i
            while j + 1 < n and mask[j + 1]:
                j += 1
            hi = INF if (tail and j == n - 1) else float(s_grid[j])
            lo = float(s_grid[i])
            if lo < hi:
                ivs.append((lo, hi))
            elif math.isinf(hi):
                ivs.append((lo, INF))
            i = j + 1
        else:
            i += 1
    return IntervalUnion(ivs)
