"""Dense bounded-variable simplex for the package's small linear programs.

Solves  min c'x  s.t.  A x = b,  lo <= x <= hi.  Problem sizes here are tens
of variables and constraints (interval hulls, membership tests, support
values over constrained zonotopes), so a two-phase dense method with an
explicit basis solve per iteration is entirely adequate and keeps the
package free of solver dependencies.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ._feaskernel import HAVE_NUMBA, phase1_min_residual
from .errors import DimensionMismatch, NumericalFailure

FEAS_TOL = 1e-9
OPT_TOL = 1e-8

_PIVOT_TOL = 1e-10
_TIE_TOL = 1e-12


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LinearProgram:
    """min objective'x  s.t.  eq_lhs x = eq_rhs,  box_lo <= x <= box_hi."""

    objective: np.ndarray
    eq_lhs: np.ndarray
    eq_rhs: np.ndarray
    box_lo: np.ndarray
    box_hi: np.ndarray


@dataclass(frozen=True)
class LpOutcome:
    status: LpStatus
    value: float | None = None
    point: np.ndarray | None = None


class _Unbounded(Exception):
    pass


def _box(n: int, lo, hi) -> tuple[np.ndarray, np.ndarray]:
    lo = np.full(n, -1.0) if lo is None else np.asarray(lo, dtype=float)
    hi = np.full(n, 1.0) if hi is None else np.asarray(hi, dtype=float)
    return lo, hi


def _iterate(c, M, b, lo, hi, basis, at_upper, opt_tol, bland_after, hard_cap):
    """Run bounded-variable simplex iterations in place; returns x.

    ``basis`` and ``at_upper`` are mutated.  Raises _Unbounded when the
    objective is unbounded below, NumericalFailure when the iteration cap
    is exhausted.  Maintains an explicit basis inverse with rank-1 pivot
    updates; refreshed periodically to control drift.
    """
    m, k = M.shape
    is_basic = np.zeros(k, dtype=bool)
    is_basic[basis] = True
    movable = (hi - lo) > 0  # fixed variables never enter
    is_free = np.isinf(lo) & np.isinf(hi)  # nonbasic free vars sit at 0, move both ways

    def bound_values():
        x = np.where(at_upper, hi, lo)
        return np.where(np.isinf(x), 0.0, x)

    def refresh(binv=None):
        if binv is None:
            binv = np.linalg.inv(M[:, basis])
        x = bound_values()
        x[basis] = 0.0
        x[basis] = binv @ (b - M @ x)
        return binv, x

    if m == 0:
        return bound_values()
    binv, x = refresh()
    iters = 0
    while True:
        if iters > hard_cap:
            raise NumericalFailure("simplex iteration cap exceeded")
        bland = iters >= bland_after
        y = c[basis] @ binv
        d = c - y @ M
        enter_lo = ~is_basic & ~at_upper & movable & ~is_free & (d < -opt_tol)
        enter_hi = ~is_basic & at_upper & movable & ~is_free & (d > opt_tol)
        enter_free = ~is_basic & is_free & (np.abs(d) > opt_tol)
        cand = np.flatnonzero(enter_lo | enter_hi | enter_free)
        if cand.size == 0:
            return x
        if bland:
            e = int(cand[0])
        else:
            e = int(cand[np.argmax(np.abs(d[cand]))])
        if is_free[e]:
            s = -1.0 if d[e] > 0 else 1.0
        else:
            s = -1.0 if at_upper[e] else 1.0
        w = binv @ M[:, e]
        dxb = -s * w

        caps = np.full(m, np.inf)
        xb, lbb, ubb = x[basis], lo[basis], hi[basis]
        pos = dxb > _PIVOT_TOL
        neg = dxb < -_PIVOT_TOL
        caps[pos] = (ubb[pos] - xb[pos]) / dxb[pos]
        caps[neg] = (lbb[neg] - xb[neg]) / dxb[neg]
        caps = np.maximum(caps, 0.0)

        delta = hi[e] - lo[e]  # moving all the way flips the bound
        leave = -1
        cap_min = caps.min()
        if cap_min < delta:
            delta = cap_min
            ties = np.flatnonzero(caps <= cap_min + _TIE_TOL)
            if bland:
                leave = int(ties[np.argmin(basis[ties])])
            else:
                leave = int(ties[np.argmax(np.abs(dxb[ties]))])
        if not np.isfinite(delta):
            raise _Unbounded()

        enter_val = x[e] + s * delta  # nonbasic x[e] is its bound (0 for free vars)
        x[basis] = xb + dxb * delta
        if leave < 0:
            at_upper[e] = not at_upper[e]
            x[e] = hi[e] if at_upper[e] else lo[e]
        else:
            lv = int(basis[leave])
            hit_upper = dxb[leave] > 0
            at_upper[lv] = hit_upper
            x[lv] = hi[lv] if hit_upper else lo[lv]
            is_basic[lv] = False
            basis[leave] = e
            is_basic[e] = True
            x[e] = enter_val
            # rank-1 update of the basis inverse for the column swap
            pivot = w[leave]
            if abs(pivot) < _PIVOT_TOL:
                binv, x = refresh()
            else:
                row = binv[leave] / pivot
                binv -= np.outer(w, row)
                binv[leave] = row
        iters += 1
        if iters % 60 == 0:
            binv, x = refresh()


def _solve_once(c, A, b, lo, hi, feas_tol, opt_tol, start_high):
    m, n = A.shape
    if n == 0:
        if m and np.max(np.abs(b)) > feas_tol:
            return LpOutcome(LpStatus.INFEASIBLE)
        return LpOutcome(LpStatus.OPTIMAL, 0.0, np.zeros(0))
    if np.any(lo > hi):
        return LpOutcome(LpStatus.INFEASIBLE)
    if m == 0:
        x = np.where(c > 0, lo, np.where(c < 0, hi, lo))
        if np.any(np.isinf(x[c != 0])):
            return LpOutcome(LpStatus.UNBOUNDED)
        x = np.where(np.isinf(x), 0.0, x)
        return LpOutcome(LpStatus.OPTIMAL, float(c @ x), x)

    bland_after = 3 * (n + m)
    hard_cap = 200 + 50 * (n + m)

    # phase 1: artificial columns absorb the residual of a bound-feasible start
    prefer_hi = start_high & np.isfinite(hi)
    x0 = np.where(prefer_hi, hi, np.where(np.isfinite(lo), lo, 0.0))
    at_upper = np.concatenate([prefer_hi & ((hi - lo) > 0), np.zeros(m, dtype=bool)])
    r = b - A @ x0
    M1 = np.hstack([A, np.diag(np.where(r >= 0, 1.0, -1.0))])
    lo1 = np.concatenate([lo, np.zeros(m)])
    hi1 = np.concatenate([hi, np.full(m, np.inf)])
    c1 = np.concatenate([np.zeros(n), np.ones(m)])
    basis = np.arange(n, n + m)
    try:
        x1 = _iterate(c1, M1, b, lo1, hi1, basis, at_upper, opt_tol, bland_after, hard_cap)
    except _Unbounded:  # phase-1 objective is bounded below by zero
        raise NumericalFailure("phase-1 simplex reported unbounded")
    infeas = float(c1[n:] @ np.abs(x1[n:]))
    scale = max(1.0, float(np.max(np.abs(b))) if m else 1.0)
    if infeas > feas_tol * scale:
        return LpOutcome(LpStatus.INFEASIBLE)

    # purge artificials from the basis; rows with no structural pivot are redundant
    keep = np.ones(m, dtype=bool)
    B = M1[:, basis]
    for pos in range(m):
        if basis[pos] < n:
            continue
        ei = np.zeros(m)
        ei[pos] = 1.0
        row = np.linalg.solve(B.T, ei) @ A  # row of B^-1 A
        row[basis[basis < n]] = 0.0
        j = int(np.argmax(np.abs(row)))
        if np.abs(row[j]) > 1e-9:
            basis[pos] = j
            B = M1[:, basis]
        else:
            keep[pos] = False

    if not np.all(keep):
        A = A[keep]
        b = b[keep]
        basis = basis[keep]
        m = A.shape[0]
        if m == 0:
            return _solve_once(c, A, b, lo, hi, feas_tol, opt_tol, start_high)

    at_upper2 = at_upper[:n].copy()
    at_upper2[basis] = False
    try:
        x2 = _iterate(c, A, b, lo, hi, basis.copy(), at_upper2, opt_tol, bland_after, hard_cap)
    except _Unbounded:
        return LpOutcome(LpStatus.UNBOUNDED)
    x2 = np.clip(x2, np.where(np.isfinite(lo), lo, -np.inf), np.where(np.isfinite(hi), hi, np.inf))
    return LpOutcome(LpStatus.OPTIMAL, float(c @ x2), x2)


def solve_arrays(
    c,
    A,
    b,
    lo=None,
    hi=None,
    *,
    feas_tol: float = FEAS_TOL,
    opt_tol: float = OPT_TOL,
) -> LpOutcome:
    """Array entry point; box bounds default to [-1, 1] per variable."""
    c = np.asarray(c, dtype=float).ravel()
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        A = A.reshape(0, c.size)
    A = np.atleast_2d(A)
    b = np.asarray(b, dtype=float).ravel()
    lo, hi = _box(c.size, lo, hi)
    if A.shape[1] != c.size or A.shape[0] != b.size or lo.size != c.size or hi.size != c.size:
        raise DimensionMismatch(
            f"LP dims: c{c.shape}, A{A.shape}, b{b.shape}, lo{lo.shape}, hi{hi.shape}"
        )
    try:
        return _solve_once(c, A, b, lo, hi, feas_tol, opt_tol, start_high=False)
    except NumericalFailure:
        # one restart from the opposite bound assignment before giving up
        return _solve_once(c, A, b, lo, hi, feas_tol, opt_tol, start_high=True)


def solve(lp: LinearProgram, *, feas_tol: float = FEAS_TOL, opt_tol: float = OPT_TOL) -> LpOutcome:
    return solve_arrays(
        lp.objective, lp.eq_lhs, lp.eq_rhs, lp.box_lo, lp.box_hi, feas_tol=feas_tol, opt_tol=opt_tol
    )


def min_infeasibility(A, b, lo=None, hi=None) -> float:
    """Minimum L1 violation of A x = b over the box (0 when feasible)."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float).ravel()
    if A.size == 0 and b.size == 0:
        return 0.0
    A = np.atleast_2d(A)
    n = A.shape[1]
    lo, hi = _box(n, lo, hi)
    if n == 0:
        return float(np.sum(np.abs(b)))
    m_rows = A.shape[0]
    if HAVE_NUMBA and m_rows and np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)):
        scale = max(1.0, float(np.max(np.abs(b))))
        res = phase1_min_residual(
            np.ascontiguousarray(A),
            np.ascontiguousarray(b),
            np.ascontiguousarray(lo),
            np.ascontiguousarray(hi),
            OPT_TOL,
            3 * (n + m_rows),
            200 + 50 * (n + m_rows),
            1e-12 * scale,
        )
        if res >= 0.0:
            return float(res)
        # numerical breakdown in the kernel: fall through to the numpy path
    # phase 1 alone: minimize the artificial mass
    m = A.shape[0]
    x0 = np.where(np.isfinite(lo), lo, 0.0)
    r = b - A @ x0
    M1 = np.hstack([A, np.diag(np.where(r >= 0, 1.0, -1.0))])
    lo1 = np.concatenate([lo, np.zeros(m)])
    hi1 = np.concatenate([hi, np.full(m, np.inf)])
    c1 = np.concatenate([np.zeros(n), np.ones(m)])
    basis = np.arange(n, n + m)
    at_upper = np.zeros(n + m, dtype=bool)
    bland_after = 3 * (n + m)
    hard_cap = 200 + 50 * (n + m)
    try:
        x1 = _iterate(c1, M1, b, lo1, hi1, basis, at_upper, OPT_TOL, bland_after, hard_cap)
    except _Unbounded:
        raise NumericalFailure("phase-1 simplex reported unbounded")
    return float(np.sum(np.abs(x1[n:])))


def feasible(A, b, lo=None, hi=None, *, tol: float = FEAS_TOL) -> bool:
    """True iff {x : A x = b, lo <= x <= hi} is non-empty to tolerance."""
    b = np.asarray(b, dtype=float).ravel()
    scale = max(1.0, float(np.max(np.abs(b))) if b.size else 1.0)
    try:
        return min_infeasibility(A, b, lo, hi) <= tol * scale
    except NumericalFailure:
        lo_, hi_ = None, None  # retry from the high corner
        A2 = np.atleast_2d(np.asarray(A, dtype=float))
        n = A2.shape[1] if A2.size else b.size
        lo_, hi_ = _box(n, lo, hi)
        out = solve_arrays(np.zeros(n), A2, b, lo_, hi_, feas_tol=tol)
        return out.status == LpStatus.OPTIMAL
