"""Halfspace relaxations of factor-graph operations in the lifted space.

Every non-input factor z_j = g_j(z) gets a polytope Q_j in R^{n_z} that
contains its graph over the factor bounds: equalities for (sub)sums and
affine factors, the four-inequality McCormick envelope for products and
quotients, and tangent/secant cuts for convex or concave univariate
functions (tangents at the lower end, midpoint, and upper end; the secant
on the other side).  Intersecting all Q_j yields the lifted enclosure used
to propagate sets through the nonlinearity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalFailure
from .factorable import FactorGraph, eval_interval
from .intervals import Interval, IntervalVector, iv_div, iv_pow_int
from .sets import HPolytope, hpoly_intersection

DEGENERATE_WIDTH = 1e-12  # collapse to one equality at the midpoint
NEAR_DEGENERATE_WIDTH = 1e-8  # drop the midpoint tangent (duplicates endpoints)


@dataclass(frozen=True)
class LiftedPolytope:
    """Relaxation polytope plus the factor bounds it was built on."""

    poly: HPolytope
    factor_bounds: IntervalVector

    @property
    def n_half(self) -> int:
        return self.poly.n_half

    @property
    def n_eq(self) -> int:
        return self.poly.n_eq


def _row(nz: int, entries: dict[int, float]) -> np.ndarray:
    r = np.zeros(nz)
    for idx, val in entries.items():
        r[idx] += val
    return r


def _eq(nz: int, entries: dict[int, float], rhs: float) -> HPolytope:
    return HPolytope(
        np.zeros((0, nz)), np.zeros(0), _row(nz, entries).reshape(1, -1), np.array([rhs])
    )


def _ineqs(nz: int, rows: list[tuple[dict[int, float], float]]) -> HPolytope:
    H = np.vstack([_row(nz, entries) for entries, _ in rows]) if rows else np.zeros((0, nz))
    k = np.array([rhs for _, rhs in rows])
    return HPolytope(H, k, np.zeros((0, nz)), np.zeros(0))


def relax_sum(a: int, b: int, j: int, nz: int) -> HPolytope:
    """Exact: z_a + z_b - z_j = 0."""
    return _eq(nz, {a: 1.0, b: 1.0, j: -1.0}, 0.0)


def relax_sub(a: int, b: int, j: int, nz: int) -> HPolytope:
    """Exact: z_a - z_b - z_j = 0."""
    return _eq(nz, {a: 1.0, b: -1.0, j: -1.0}, 0.0)


def relax_affine(a: int, j: int, p: float, q: float, nz: int) -> HPolytope:
    """Exact: p z_a + q - z_j = 0."""
    return _eq(nz, {a: p, j: -1.0}, -q)


def relax_const(j: int, value: float, nz: int) -> HPolytope:
    """Exact: z_j = value."""
    return _eq(nz, {j: 1.0}, value)


def _mccormick_rows(x: int, y: int, prod: int, X: Interval, Y: Interval, nz: int) -> HPolytope:
    """Envelope of z_prod = z_x * z_y over X x Y, rearranged to H z <= k."""
    xl, xu = X.lo, X.hi
    yl, yu = Y.lo, Y.hi
    rows = [
        ({x: yl, y: xl, prod: -1.0}, xl * yl),
        ({x: yu, y: xu, prod: -1.0}, xu * yu),
        ({x: -yu, y: -xl, prod: 1.0}, -xl * yu),
        ({x: -yl, y: -xu, prod: 1.0}, -xu * yl),
    ]
    return _ineqs(nz, rows)


def relax_mul(a: int, b: int, j: int, za: Interval, zb: Interval, nz: int) -> HPolytope:
    return _mccormick_rows(a, b, j, za, zb, nz)


def relax_div(a: int, b: int, j: int, za: Interval, zb: Interval, nz: int) -> HPolytope:
    """z_j = z_a / z_b rewritten as z_a = z_b z_j; the quotient bounds come
    from the natural interval extension."""
    zj = iv_div(za, zb)  # raises when 0 is a possible divisor
    return _mccormick_rows(b, j, a, zb, zj, nz)


def _tangent_under(a, j, f, df, t):
    # z_j >= f(t) + f'(t)(z_a - t)
    return ({a: df(t), j: -1.0}, df(t) * t - f(t))


def _tangent_over(a, j, f, df, t):
    # z_j <= f(t) + f'(t)(z_a - t)
    return ({a: -df(t), j: 1.0}, f(t) - df(t) * t)


def _tangent_points(lo: float, hi: float) -> list[float]:
    if hi - lo < NEAR_DEGENERATE_WIDTH:
        return [lo, hi]
    return [lo, 0.5 * (lo + hi), hi]


def _convex_rows(a, j, nz, f, df, za: Interval) -> HPolytope:
    """Convex beta: tangent underestimators at lo/mid/hi, secant over the top."""
    lo, hi = za.lo, za.hi
    if hi - lo < DEGENERATE_WIDTH:
        return _eq(nz, {j: 1.0}, f(0.5 * (lo + hi)))
    rows = [_tangent_under(a, j, f, df, t) for t in _tangent_points(lo, hi)]
    s = (f(hi) - f(lo)) / (hi - lo)
    rows.append(({a: -s, j: 1.0}, f(lo) - s * lo))
    return _ineqs(nz, rows)


def _concave_rows(a, j, nz, f, df, za: Interval) -> HPolytope:
    """Concave beta: tangent overestimators at lo/mid/hi, secant underneath."""
    lo, hi = za.lo, za.hi
    if hi - lo < DEGENERATE_WIDTH:
        return _eq(nz, {j: 1.0}, f(0.5 * (lo + hi)))
    rows = [_tangent_over(a, j, f, df, t) for t in _tangent_points(lo, hi)]
    s = (f(hi) - f(lo)) / (hi - lo)
    rows.append(({a: s, j: -1.0}, s * lo - f(lo)))
    return _ineqs(nz, rows)


def relax_exp(a: int, j: int, za: Interval, nz: int) -> HPolytope:
    return _convex_rows(a, j, nz, math.exp, math.exp, za)


def relax_log(a: int, j: int, za: Interval, nz: int) -> HPolytope:
    if za.lo <= 0.0:
        raise DomainError(f"log relaxation needs a positive domain, got {za}")
    return _concave_rows(a, j, nz, math.log, lambda t: 1.0 / t, za)


def relax_even_pow(a: int, j: int, q: int, za: Interval, nz: int) -> HPolytope:
    if q < 2 or q % 2:
        raise ValueError(f"even power expected, got {q}")
    f = lambda t: t**q
    df = lambda t: q * t ** (q - 1)
    return _convex_rows(a, j, nz, f, df, za)


def _odd_tangency(l: float, u: float, q: int) -> float | None:
    """Solve q r^(q-1) (r - l) = r^q - l^q on [0, u] for the point where the
    secant from (l, l^q) turns tangent; None if it lies beyond u.

    phi is increasing on [0, u] with phi(0) = l^q < 0, so a safeguarded
    Newton iteration with a bisection bracket always converges.
    """

    def phi(r):
        return q * r ** (q - 1) * (r - l) - r**q + l**q

    def dphi(r):
        return q * (q - 1) * r ** (q - 2) * (r - l)

    if phi(u) <= 0.0:
        return None
    lo_r, hi_r = 0.0, u
    r = 0.5 * u
    scale = max(1.0, abs(l) ** q, u**q)
    for _ in range(100):
        val = phi(r)
        if abs(val) <= 1e-14 * scale:
            return r
        if val > 0.0:
            hi_r = r
        else:
            lo_r = r
        d = dphi(r)
        step_ok = False
        if d > 0.0:
            r_new = r - val / d
            if lo_r < r_new < hi_r:
                r = r_new
                step_ok = True
        if not step_ok:
            r = 0.5 * (lo_r + hi_r)
        if hi_r - lo_r < 1e-15 * max(1.0, u):
            return 0.5 * (lo_r + hi_r)
    raise NumericalFailure("odd-power tangency search did not converge")


def _certified_under_line(l: float, u: float, q: int, s: float, c: float):
    """Lower a candidate underestimator line z = c + s(x - l) by its maximal
    violation over [0, u] (where x^q is convex), making it certifiably valid."""
    # the extremum of line - x^q on the convex side is where q x^(q-1) = s
    if s > 0:
        xt = (s / q) ** (1.0 / (q - 1))
        if 0.0 < xt < u:
            viol = (c + s * (xt - l)) - xt**q
            if viol > 0.0:
                c -= viol * (1 + 1e-12) + 1e-15
    for x in (l, u):
        viol = (c + s * (x - l)) - x**q
        if viol > 0.0:
            c -= viol * (1 + 1e-12) + 1e-15
    return s, c


def _odd_mixed_rows(a, j, q, za: Interval, nz) -> HPolytope:
    """0 interior to the domain: convex envelope is the secant from the left
    endpoint to its tangency point, then the function; mirrored for the
    concave side.  Emits the two envelope secants plus the endpoint tangents
    where the function is purely convex/concave."""
    l, u = za.lo, za.hi
    f = lambda t: t**q
    df = lambda t: q * t ** (q - 1)
    try:
        rows = []
        r = _odd_tangency(l, u, q)
        # convex underestimator side
        if r is None:
            s = (f(u) - f(l)) / (u - l)
            s, c = _certified_under_line(l, u, q, s, f(l))
            rows.append(({a: s, j: -1.0}, s * l - c))
        else:
            s, c = _certified_under_line(l, u, q, df(r), f(l))
            rows.append(({a: s, j: -1.0}, s * l - c))
            rows.append(_tangent_under(a, j, f, df, u))
        # concave overestimator side (mirror x -> -x)
        rm = _odd_tangency(-u, -l, q)
        if rm is None:
            s = (f(u) - f(l)) / (u - l)
            sm, cm = _certified_under_line(-u, -l, q, s, f(-u))
            # mirrored line: z <= -cm + sm (x - u)
            rows.append(({a: -sm, j: 1.0}, -cm - sm * u))
        else:
            sm, cm = _certified_under_line(-u, -l, q, df(rm), f(-u))
            rows.append(({a: -sm, j: 1.0}, -cm - sm * u))
            rows.append(_tangent_over(a, j, f, df, l))
    except NumericalFailure:
        # certified fallback: interval box on z_j plus the endpoint tangents
        # that remain valid without the tangency point
        box = iv_pow_int(za, q)
        rows = [({j: 1.0}, box.hi), ({j: -1.0}, -box.lo)]
        if _tangency_within(l, u, q):
            rows.append(_tangent_under(a, j, f, df, u))
        if _tangency_within(-u, -l, q):
            rows.append(_tangent_over(a, j, f, df, l))
    return _ineqs(nz, rows)


def _tangency_within(l: float, u: float, q: int) -> bool:
    return q * u ** (q - 1) * (u - l) - u**q + l**q > 0.0


def relax_odd_pow(a: int, j: int, q: int, za: Interval, nz: int) -> HPolytope:
    if q < 3 or q % 2 == 0:
        raise ValueError(f"odd power >= 3 expected, got {q}")
    f = lambda t: t**q
    df = lambda t: q * t ** (q - 1)
    if za.hi - za.lo < DEGENERATE_WIDTH:
        return _eq(nz, {j: 1.0}, f(0.5 * (za.lo + za.hi)))
    if za.hi <= 0.0:
        return _concave_rows(a, j, nz, f, df, za)
    if za.lo >= 0.0:
        return _convex_rows(a, j, nz, f, df, za)
    return _odd_mixed_rows(a, j, q, za, nz)


def relax_factor(node_index: int, g: FactorGraph, z: IntervalVector, nz: int) -> HPolytope:
    """Q_j for one non-input factor given the factor bounds."""
    node = g.nodes[node_index]
    j = node_index
    k = node.kind
    if k == "const":
        return relax_const(j, node.value, nz)
    if k == "add":
        return relax_sum(node.a, node.b, j, nz)
    if k == "sub":
        return relax_sub(node.a, node.b, j, nz)
    if k == "affine":
        return relax_affine(node.a, j, node.p, node.q, nz)
    if k == "mul":
        return relax_mul(node.a, node.b, j, z[node.a], z[node.b], nz)
    if k == "div":
        return relax_div(node.a, node.b, j, z[node.a], z[node.b], nz)
    if k == "exp":
        return relax_exp(node.a, j, z[node.a], nz)
    if k == "log":
        return relax_log(node.a, j, z[node.a], nz)
    if k == "pow":
        if node.power % 2 == 0:
            return relax_even_pow(node.a, j, node.power, z[node.a], nz)
        return relax_odd_pow(node.a, j, node.power, z[node.a], nz)
    raise AssertionError(k)


def build_lifted_polytope(g: FactorGraph, X: IntervalVector) -> LiftedPolytope:
    """Stack every Q_j over the natural-extension factor bounds.

    The result P satisfies {h(x) : x in X} subseteq {E z : z in P} and the
    exact factor vector of every x in X lies in P.
    """
    z = eval_interval(g, X)
    nz = g.n_factors
    poly = HPolytope.whole_space(nz)
    for j in range(g.n_inputs, nz):
        try:
            qj = relax_factor(j, g, z, nz)
        except DomainError as exc:
            if exc.factor is None:
                raise DomainError(str(exc), factor=j) from None
            raise
        poly = hpoly_intersection(poly, qj)
    return LiftedPolytope(poly, z)
