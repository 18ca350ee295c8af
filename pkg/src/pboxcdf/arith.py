"""Interval arithmetic on quantile ranges, plus the cdf-domain projection.

Arithmetic moves quantile bounds exactly as real interval arithmetic does;
cdf components are recovered afterwards by sliding each bound point along
its own cdf line onto the new quantile range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .pbox import (
    DivisorStraddlesZero,
    Inconsistent,
    PboxInterval,
    anchor_lower,
    anchor_upper,
    repair_dominance,
    tolerance,
)


@dataclass(frozen=True, slots=True)
class QuantileInterval:
    """Closed real interval of quantiles."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError(f"bounds must be finite, got [{self.lo!r}, {self.hi!r}]")
        if self.lo > self.hi:
            raise ValueError(f"bounds out of order: {self.lo!r} > {self.hi!r}")

    def contains_zero(self) -> bool:
        return self.lo <= 0.0 <= self.hi

    @property
    def width(self) -> float:
        return self.hi - self.lo


def _checked(lo: float, hi: float) -> QuantileInterval:
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError(f"interval arithmetic overflowed to [{lo!r}, {hi!r}]")
    return QuantileInterval(lo, hi)


def q_add(a: QuantileInterval, b: QuantileInterval) -> QuantileInterval:
    return _checked(a.lo + b.lo, a.hi + b.hi)


def q_sub(a: QuantileInterval, b: QuantileInterval) -> QuantileInterval:
    return _checked(a.lo - b.hi, a.hi - b.lo)


def q_mul(a: QuantileInterval, b: QuantileInterval) -> QuantileInterval:
    products = (a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi)
    return _checked(min(products), max(products))


def q_div(a: QuantileInterval, b: QuantileInterval) -> QuantileInterval:
    if b.contains_zero():
        raise DivisorStraddlesZero(
            f"divisor range [{b.lo!r}, {b.hi!r}] contains zero"
        )
    return q_mul(a, QuantileInterval(1.0 / b.hi, 1.0 / b.lo))


def slide(interval: PboxInterval, target: QuantileInterval) -> PboxInterval:
    """Intersect the quantile range with ``target`` and re-anchor both cdf
    points along their own lines; the result is dominance-repaired.

    Sub-tolerance inversions of the intersection are rounding noise and
    collapse to a point instead of failing.
    """
    lo_q = max(interval.lo.q, target.lo)
    hi_q = min(interval.hi.q, target.hi)
    if lo_q > hi_q:
        if lo_q - hi_q > tolerance():
            raise Inconsistent(
                f"quantile ranges [{interval.lo.q!r}, {interval.hi.q!r}] and "
                f"[{target.lo!r}, {target.hi!r}] are disjoint"
            )
        lo_q = hi_q = 0.5 * (lo_q + hi_q)
    if lo_q == interval.lo.q and hi_q == interval.hi.q:
        return interval
    return repair_dominance(
        PboxInterval(anchor_upper(interval.lo, lo_q), anchor_lower(interval.hi, hi_q))
    )
