"""Scalar and vector interval arithmetic.

Endpoint formulas over ordinary float64; no directed rounding.  A global
inflation epsilon (default 0) can be set to pad every computed result
symmetrically when a rigor margin on top of round-to-nearest is wanted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import DivisionByZeroInterval, DomainError

_INFLATION_EPS = 0.0


def set_inflation(eps: float) -> None:
    """Set the symmetric padding added to every computed interval endpoint."""
    global _INFLATION_EPS
    if eps < 0:
        raise ValueError("inflation epsilon must be non-negative")
    _INFLATION_EPS = float(eps)


def get_inflation() -> float:
    return _INFLATION_EPS


@dataclass(frozen=True)
class Interval:
    """Closed interval [lo, hi]; the empty set is a tagged sentinel."""

    lo: float
    hi: float
    empty: bool = False

    def __post_init__(self):
        if not self.empty and not self.lo <= self.hi:
            raise ValueError(f"invalid interval endpoints [{self.lo}, {self.hi}]")

    @staticmethod
    def point(v: float) -> "Interval":
        return Interval(float(v), float(v))

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def __repr__(self):
        if self.empty:
            return "Interval(empty)"
        return f"[{self.lo}, {self.hi}]"

    def __add__(self, other):
        return iv_add(self, _coerce(other))

    def __radd__(self, other):
        return iv_add(_coerce(other), self)

    def __sub__(self, other):
        return iv_sub(self, _coerce(other))

    def __rsub__(self, other):
        return iv_sub(_coerce(other), self)

    def __mul__(self, other):
        return iv_mul(self, _coerce(other))

    def __rmul__(self, other):
        return iv_mul(_coerce(other), self)

    def __truediv__(self, other):
        return iv_div(self, _coerce(other))

    def __rtruediv__(self, other):
        return iv_div(_coerce(other), self)

    def __neg__(self):
        if self.empty:
            return EMPTY_INTERVAL
        return Interval(-self.hi, -self.lo)


EMPTY_INTERVAL = Interval(math.inf, -math.inf, empty=True)


def _coerce(v) -> Interval:
    if isinstance(v, Interval):
        return v
    return Interval.point(v)


def _result(lo: float, hi: float) -> Interval:
    eps = _INFLATION_EPS
    if eps:
        lo, hi = lo - eps, hi + eps
    return Interval(lo, hi)


def iv_add(a: Interval, b: Interval) -> Interval:
    if a.empty or b.empty:
        return EMPTY_INTERVAL
    return _result(a.lo + b.lo, a.hi + b.hi)


def iv_sub(a: Interval, b: Interval) -> Interval:
    if a.empty or b.empty:
        return EMPTY_INTERVAL
    return _result(a.lo - b.hi, a.hi - b.lo)


def iv_mul(a: Interval, b: Interval) -> Interval:
    if a.empty or b.empty:
        return EMPTY_INTERVAL
    p1 = a.lo * b.lo
    p2 = a.lo * b.hi
    p3 = a.hi * b.lo
    p4 = a.hi * b.hi
    return _result(min(p1, p2, p3, p4), max(p1, p2, p3, p4))


def iv_div(a: Interval, b: Interval) -> Interval:
    if a.empty or b.empty:
        return EMPTY_INTERVAL
    if b.lo <= 0.0 <= b.hi:
        raise DivisionByZeroInterval(f"division by interval {b} containing zero")
    q1 = a.lo / b.lo
    q2 = a.lo / b.hi
    q3 = a.hi / b.lo
    q4 = a.hi / b.hi
    return _result(min(q1, q2, q3, q4), max(q1, q2, q3, q4))


def iv_exp(a: Interval) -> Interval:
    if a.empty:
        return EMPTY_INTERVAL
    return _result(math.exp(a.lo), math.exp(a.hi))


def iv_log(a: Interval) -> Interval:
    if a.empty:
        return EMPTY_INTERVAL
    if a.lo <= 0.0:
        raise DomainError(f"log of non-positive interval {a}")
    return _result(math.log(a.lo), math.log(a.hi))


def iv_pow_int(a: Interval, q: int) -> Interval:
    """Integer power by parity/monotonicity case analysis.

    Tighter than repeated multiplication for even powers (no dependency
    blow-up: [-2,1]^2 is [0,4], not [-2,4]).
    """
    if a.empty:
        return EMPTY_INTERVAL
    q = int(q)
    if q == 0:
        return _result(1.0, 1.0)
    if q < 0:
        if a.lo <= 0.0 <= a.hi:
            raise DomainError(f"negative power of interval {a} containing zero")
        pos = iv_pow_int(a, -q)
        return _result(1.0 / pos.hi, 1.0 / pos.lo)
    if q % 2 == 1:
        return _result(a.lo**q, a.hi**q)
    # even power: minimum at 0 when the interval straddles it
    lo_q, hi_q = a.lo**q, a.hi**q
    if a.lo <= 0.0 <= a.hi:
        return _result(0.0, max(lo_q, hi_q))
    return _result(min(lo_q, hi_q), max(lo_q, hi_q))


def iv_mid(a: Interval) -> float:
    return 0.5 * (a.lo + a.hi)


def iv_rad(a: Interval) -> float:
    return 0.5 * (a.hi - a.lo)


def iv_hull(a: Interval, b: Interval) -> Interval:
    if a.empty:
        return b
    if b.empty:
        return a
    return Interval(min(a.lo, b.lo), max(a.hi, b.hi))


def iv_intersect(a: Interval, b: Interval) -> Interval:
    if a.empty or b.empty:
        return EMPTY_INTERVAL
    lo, hi = max(a.lo, b.lo), min(a.hi, b.hi)
    if lo > hi:
        return EMPTY_INTERVAL
    return Interval(lo, hi)


def iv_contains(a: Interval, x: float) -> bool:
    return (not a.empty) and a.lo <= x <= a.hi


class IntervalVector:
    """Ordered tuple of intervals, with numpy views of the endpoints."""

    __slots__ = ("elems",)

    def __init__(self, elems: Iterable[Interval]):
        self.elems: tuple[Interval, ...] = tuple(elems)

    @staticmethod
    def from_arrays(lo: Sequence[float], hi: Sequence[float]) -> "IntervalVector":
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("endpoint arrays must be 1-D and of equal length")
        return IntervalVector(Interval(float(a), float(b)) for a, b in zip(lo, hi))

    @property
    def lo(self) -> np.ndarray:
        return np.array([e.lo for e in self.elems])

    @property
    def hi(self) -> np.ndarray:
        return np.array([e.hi for e in self.elems])

    @property
    def mid(self) -> np.ndarray:
        return np.array([iv_mid(e) for e in self.elems])

    @property
    def rad(self) -> np.ndarray:
        return np.array([iv_rad(e) for e in self.elems])

    def concat(self, other: "IntervalVector") -> "IntervalVector":
        return IntervalVector(self.elems + other.elems)

    def slice(self, start: int, stop: int | None = None) -> "IntervalVector":
        return IntervalVector(self.elems[start:stop])

    def contains(self, x: Sequence[float], tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(self.lo - tol <= x) and np.all(x <= self.hi + tol))

    def __len__(self) -> int:
        return len(self.elems)

    def __iter__(self) -> Iterator[Interval]:
        return iter(self.elems)

    def __getitem__(self, i: int) -> Interval:
        return self.elems[i]

    def __repr__(self):
        return "IntervalVector(" + ", ".join(repr(e) for e in self.elems) + ")"


@dataclass(frozen=True)
class IntervalMatrix:
    """Entrywise interval matrix stored as a pair of float arrays."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        if self.lo.shape != self.hi.shape:
            raise ValueError("endpoint arrays must have the same shape")

    @property
    def shape(self) -> tuple[int, int]:
        return self.lo.shape

    @property
    def mid(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def rad(self) -> np.ndarray:
        return 0.5 * (self.hi - self.lo)

    def contains(self, m: np.ndarray, tol: float = 0.0) -> bool:
        return bool(np.all(self.lo - tol <= m) and np.all(m <= self.hi + tol))
