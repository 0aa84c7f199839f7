"""Constrained zonotopes, H-rep polytopes, and their set operations.

A constrained zonotope Z = {c + G xi : ||xi||_inf <= 1, A xi = b} represents
any convex polytope while keeping Minkowski sums, linear images, Cartesian
products, and intersections as cheap block assemblies.  The halfspace
polytope P = {x : H x <= k, Aeq x = beq} is the companion representation
used for lifted relaxations; ``intersect_hpoly`` pulls such a polytope into
CG-rep without leaving the class.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from . import linprog
from .errors import DimensionMismatch, EmptySetError, NumericalFailure
from .intervals import Interval, IntervalVector, iv_intersect

SigmaMode = Literal["interval", "lp"]


def _mat(x, rows=None, cols=None) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.size == 0:
        a = a.reshape((rows if rows is not None else 0, cols if cols is not None else 0))
    a = np.atleast_2d(a)
    return a


def _vec(x) -> np.ndarray:
    return np.asarray(x, dtype=float).ravel()


@dataclass(frozen=True)
class ConstrainedZonotope:
    """CG-rep (G, c, A, b); A and b may be empty for a plain zonotope."""

    G: np.ndarray
    c: np.ndarray
    A: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    b: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        c = _vec(self.c)
        G = _mat(self.G, rows=c.size)
        b = _vec(self.b)
        A = _mat(self.A, rows=b.size, cols=G.shape[1])
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        if G.shape[0] != c.size:
            raise DimensionMismatch(f"G has {G.shape[0]} rows but c has {c.size}")
        if A.shape[0] != b.size:
            raise DimensionMismatch(f"A has {A.shape[0]} rows but b has {b.size}")
        if A.shape[1] != G.shape[1]:
            raise DimensionMismatch(f"A has {A.shape[1]} cols but G has {G.shape[1]}")

    @property
    def dim(self) -> int:
        return self.c.size

    @property
    def n_gens(self) -> int:
        return self.G.shape[1]

    @property
    def n_cons(self) -> int:
        return self.A.shape[0]

    @property
    def is_zonotope(self) -> bool:
        return self.n_cons == 0

    def point(self, xi: Sequence[float]) -> np.ndarray:
        return self.c + self.G @ np.asarray(xi, dtype=float)

    def __repr__(self):
        return f"ConstrainedZonotope(dim={self.dim}, n_gens={self.n_gens}, n_cons={self.n_cons})"


@dataclass(frozen=True)
class HPolytope:
    """H-rep (H, k, Aeq, beq); either block may be empty."""

    H: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    k: np.ndarray = field(default_factory=lambda: np.zeros(0))
    Aeq: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    beq: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        k = _vec(self.k)
        beq = _vec(self.beq)
        H = _mat(self.H, rows=k.size)
        Aeq = _mat(self.Aeq, rows=beq.size, cols=H.shape[1] if H.size else None)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "Aeq", Aeq)
        object.__setattr__(self, "beq", beq)
        if H.shape[0] != k.size or Aeq.shape[0] != beq.size:
            raise DimensionMismatch("halfspace/equality block row counts disagree")
        if H.shape[0] and Aeq.shape[0] and H.shape[1] != Aeq.shape[1]:
            raise DimensionMismatch("halfspace and equality blocks disagree on dimension")

    @property
    def dim(self) -> int:
        if self.H.shape[0]:
            return self.H.shape[1]
        if self.Aeq.shape[0]:
            return self.Aeq.shape[1]
        return self.H.shape[1] or self.Aeq.shape[1]

    @property
    def n_half(self) -> int:
        return self.H.shape[0]

    @property
    def n_eq(self) -> int:
        return self.Aeq.shape[0]

    def contains(self, x: Sequence[float], tol: float = 0.0) -> bool:
        x = _vec(x)
        ok = True
        if self.n_half:
            ok = bool(np.all(self.H @ x <= self.k + tol))
        if ok and self.n_eq:
            ok = bool(np.all(np.abs(self.Aeq @ x - self.beq) <= tol))
        return ok

    @staticmethod
    def whole_space(dim: int) -> "HPolytope":
        return HPolytope(np.zeros((0, dim)), np.zeros(0), np.zeros((0, dim)), np.zeros(0))


def cz_from_interval(x: IntervalVector) -> ConstrainedZonotope:
    """G-rep of a box: diag(rad) generators around the midpoint.

    Degenerate components keep their zero generator column.
    """
    for e in x:
        if e.empty:
            raise EmptySetError("cannot build a set from an empty interval")
    return ConstrainedZonotope(np.diag(x.rad), x.mid)


def cartesian_product(z: ConstrainedZonotope, w: ConstrainedZonotope) -> ConstrainedZonotope:
    G = np.block(
        [
            [z.G, np.zeros((z.dim, w.n_gens))],
            [np.zeros((w.dim, z.n_gens)), w.G],
        ]
    )
    c = np.concatenate([z.c, w.c])
    A = np.block(
        [
            [z.A, np.zeros((z.n_cons, w.n_gens))],
            [np.zeros((w.n_cons, z.n_gens)), w.A],
        ]
    )
    b = np.concatenate([z.b, w.b])
    return ConstrainedZonotope(G, c, A, b)


def linear_image(R, z: ConstrainedZonotope) -> ConstrainedZonotope:
    R = _mat(R)
    if R.shape[1] != z.dim:
        raise DimensionMismatch(f"matrix has {R.shape[1]} cols, set has dim {z.dim}")
    return ConstrainedZonotope(R @ z.G, R @ z.c, z.A, z.b)


def minkowski_sum(z: ConstrainedZonotope, w: ConstrainedZonotope) -> ConstrainedZonotope:
    if z.dim != w.dim:
        raise DimensionMismatch(f"dims {z.dim} and {w.dim}")
    G = np.hstack([z.G, w.G])
    A = np.block(
        [
            [z.A, np.zeros((z.n_cons, w.n_gens))],
            [np.zeros((w.n_cons, z.n_gens)), w.A],
        ]
    )
    return ConstrainedZonotope(G, z.c + w.c, A, np.concatenate([z.b, w.b]))


def generalized_intersection(
    z: ConstrainedZonotope, y: ConstrainedZonotope, R
) -> ConstrainedZonotope:
    """Z `cap_R` Y = {z in Z : R z in Y}."""
    R = _mat(R)
    if R.shape[1] != z.dim or R.shape[0] != y.dim:
        raise DimensionMismatch("R must map from dim(Z) to dim(Y)")
    G = np.hstack([z.G, np.zeros((z.dim, y.n_gens))])
    A = np.block(
        [
            [z.A, np.zeros((z.n_cons, y.n_gens))],
            [np.zeros((y.n_cons, z.n_gens)), y.A],
            [R @ z.G, -y.G],
        ]
    )
    b = np.concatenate([z.b, y.b, y.c - R @ z.c])
    return ConstrainedZonotope(G, z.c, A, b)


def hpoly_intersection(p: HPolytope, q: HPolytope) -> HPolytope:
    dims = {d for d in (p.dim, q.dim) if d}
    if len(dims) > 1:
        raise DimensionMismatch(f"ambient dims {p.dim} and {q.dim}")
    n = dims.pop() if dims else 0
    return HPolytope(
        np.vstack([_mat(p.H, cols=n), _mat(q.H, cols=n)]),
        np.concatenate([p.k, q.k]),
        np.vstack([_mat(p.Aeq, cols=n), _mat(q.Aeq, cols=n)]),
        np.concatenate([p.beq, q.beq]),
    )


def support(z: ConstrainedZonotope, direction, *, lower: bool = False):
    """Support value and attaining point of Z along ``direction`` via one LP."""
    d = _vec(direction)
    if d.size != z.dim:
        raise DimensionMismatch("direction dimension mismatch")
    obj = d @ z.G
    out = linprog.solve_arrays(obj if lower else -obj, z.A, z.b)
    if out.status != linprog.LpStatus.OPTIMAL:
        raise EmptySetError("support LP infeasible: the set is empty")
    point = z.point(out.point)
    return float(d @ point), point


def interval_hull(z: ConstrainedZonotope) -> IntervalVector:
    """Tightest axis-aligned box, one LP per face (closed form for zonotopes)."""
    if z.n_cons == 0:
        spread = np.sum(np.abs(z.G), axis=1)
        return IntervalVector.from_arrays(z.c - spread, z.c + spread)
    lo = np.empty(z.dim)
    hi = np.empty(z.dim)
    for i in range(z.dim):
        row = z.G[i]
        out_lo = linprog.solve_arrays(row, z.A, z.b)
        if out_lo.status != linprog.LpStatus.OPTIMAL:
            raise EmptySetError("interval hull LP infeasible: the set is empty")
        out_hi = linprog.solve_arrays(-row, z.A, z.b)
        lo[i] = z.c[i] + out_lo.value
        hi[i] = z.c[i] - out_hi.value
    hi = np.maximum(hi, lo)  # guard LP jitter on degenerate coordinates
    return IntervalVector.from_arrays(lo, hi)


def contains_point(z: ConstrainedZonotope, x, tol: float = linprog.FEAS_TOL) -> bool:
    """Membership via feasibility: exists xi in the unit box with
    A xi = b and G xi = x - c, decided to tolerance ``tol``."""
    x = _vec(x)
    if x.size != z.dim:
        raise DimensionMismatch(f"point dim {x.size}, set dim {z.dim}")
    eq = np.vstack([z.A, z.G])
    rhs = np.concatenate([z.b, x - z.c])
    scale = max(1.0, float(np.max(np.abs(rhs))) if rhs.size else 1.0)
    return linprog.min_infeasibility(eq, rhs) <= tol * scale


def contains_points(z: ConstrainedZonotope, xs, tol: float = linprog.FEAS_TOL) -> np.ndarray:
    """Vectorized membership over rows of ``xs`` (plumbing for audits)."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    if xs.shape[1] != z.dim:
        raise DimensionMismatch(f"points dim {xs.shape[1]}, set dim {z.dim}")
    # cheap necessary condition first: the interval hull
    hull = interval_hull(z)
    inside_box = np.all(xs >= hull.lo - tol, axis=1) & np.all(xs <= hull.hi + tol, axis=1)
    out = np.zeros(xs.shape[0], dtype=bool)
    eq = np.vstack([z.A, z.G])
    nb = z.b.size
    rhs = np.concatenate([z.b, np.zeros(z.dim)])
    for i in np.flatnonzero(inside_box):
        rhs[nb:] = xs[i] - z.c
        scale = max(1.0, float(np.max(np.abs(rhs))))
        out[i] = linprog.min_infeasibility(eq, rhs) <= tol * scale
    return out


def is_empty(z: ConstrainedZonotope, tol: float = linprog.FEAS_TOL) -> bool:
    return not linprog.feasible(z.A, z.b, tol=tol)


def sigma_lower_bound(z: ConstrainedZonotope, H, mode: SigmaMode = "interval") -> np.ndarray:
    """Componentwise lower bounds sigma <= H z for all z in Z.

    "interval" ignores the constraints (valid since the constrained factor
    box is inside the unit box) and is free; "lp" solves one support LP per
    row and is tighter.
    """
    H = _mat(H)
    if H.shape[1] != z.dim:
        raise DimensionMismatch("H column count must match set dimension")
    if mode == "interval":
        return H @ z.c - np.sum(np.abs(H @ z.G), axis=1)
    if mode != "lp":
        raise ValueError(f"unknown sigma mode: {mode!r}")
    sig = np.empty(H.shape[0])
    for i in range(H.shape[0]):
        val, _ = support(z, H[i], lower=True)
        sig[i] = val
    return sig


def intersect_hpoly(
    z: ConstrainedZonotope, p: HPolytope, sigma_mode: SigmaMode = "interval"
) -> ConstrainedZonotope:
    """Z cap P in CG-rep.

    Each halfspace H_i x <= k_i becomes an interval condition
    H_i z in [sigma_i, k_i] encoded with one extra generator; equality rows
    transfer directly.  The result may be empty; emptiness is detected
    downstream when a hull is requested.
    """
    n = z.dim
    if p.dim and p.dim != n:
        raise DimensionMismatch(f"set dim {n}, polytope dim {p.dim}")
    nh = p.n_half
    ncp = p.n_eq
    H = _mat(p.H, cols=n)
    Aeq = _mat(p.Aeq, cols=n)
    if nh:
        sigma = sigma_lower_bound(z, H, sigma_mode)
        Gq = 0.5 * np.diag(p.k - sigma)
        cq = 0.5 * (p.k + sigma)
        mid_rows = np.hstack([H @ z.G, -Gq])
        mid_rhs = cq - H @ z.c
    else:
        mid_rows = np.zeros((0, z.n_gens))
        mid_rhs = np.zeros(0)
    A = np.vstack(
        [
            np.hstack([z.A, np.zeros((z.n_cons, nh))]),
            mid_rows if nh else np.zeros((0, z.n_gens + nh)),
            np.hstack([Aeq @ z.G, np.zeros((ncp, nh))]),
        ]
    )
    b = np.concatenate([z.b, mid_rhs, p.beq - Aeq @ z.c])
    G = np.hstack([z.G, np.zeros((n, nh))])
    return ConstrainedZonotope(G, z.c, A, b)


def _constraint_box_enclosure(A: np.ndarray, b: np.ndarray, n_gens: int, sweeps: int = 3):
    """Interval enclosure of {xi in [-1,1]^n : A xi = b} by constraint
    propagation; returns None when propagation proves emptiness."""
    elems = [Interval(-1.0, 1.0) for _ in range(n_gens)]
    for _ in range(sweeps):
        changed = False
        for i in range(A.shape[0]):
            row = A[i]
            if not (np.all(np.isfinite(row)) and np.isfinite(b[i])):
                continue
            nz = np.flatnonzero(np.abs(row) > 1e-14)
            if nz.size == 0:
                if abs(b[i]) > 1e-9:
                    return None
                continue
            # total = sum_j row_j xi_j as intervals
            los = np.array([elems[j].lo for j in nz])
            his = np.array([elems[j].hi for j in nz])
            terms_lo = np.minimum(row[nz] * los, row[nz] * his)
            terms_hi = np.maximum(row[nz] * los, row[nz] * his)
            tot_lo = terms_lo.sum()
            tot_hi = terms_hi.sum()
            for idx, j in enumerate(nz):
                rest_lo = tot_lo - terms_lo[idx]
                rest_hi = tot_hi - terms_hi[idx]
                coeff = row[j]
                lo_j = (b[i] - rest_hi) / coeff
                hi_j = (b[i] - rest_lo) / coeff
                if coeff < 0:
                    lo_j, hi_j = hi_j, lo_j
                new = iv_intersect(elems[j], Interval(lo_j, hi_j))
                if new.empty:
                    return None
                if new != elems[j]:
                    elems[j] = new
                    changed = True
        if not changed:
            break
    return IntervalVector(elems)


def _rescale(z: ConstrainedZonotope, enc: IntervalVector) -> ConstrainedZonotope:
    """Reparameterize the factor box to the propagated enclosure (exact)."""
    mid, rad = enc.mid, enc.rad
    if not np.any(mid) and np.all(rad == 1.0):
        return z
    return ConstrainedZonotope(
        z.G * rad, z.c + z.G @ mid, z.A * rad, z.b - z.A @ mid
    )


def drop_zero_generators(z: ConstrainedZonotope) -> ConstrainedZonotope:
    """Remove generator columns that are exactly zero in both G and A."""
    used = np.any(z.G != 0.0, axis=0) | np.any(z.A != 0.0, axis=0)
    if np.all(used):
        return z
    return ConstrainedZonotope(z.G[:, used], z.c, z.A[:, used], z.b)


def _normalize_rows(A: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Scale each constraint row to unit max magnitude (set-preserving)."""
    if not A.size:
        return A, b
    scale = np.max(np.abs(A), axis=1)
    scale[scale == 0.0] = 1.0
    return A / scale[:, None], b / scale


def _eliminate_one_constraint(z: ConstrainedZonotope) -> ConstrainedZonotope:
    """Gauss-eliminate one (constraint, generator) pair, absorbing the
    solved factor's residual range; always an outer approximation."""
    A, b = _normalize_rows(z.A, z.b)
    G = z.G
    # constraints that are identically zero carry no pivot; drop the first
    zero_rows = np.flatnonzero(np.max(np.abs(A), axis=1) <= 1e-12) if A.size else np.array([])
    if zero_rows.size:
        keep = np.arange(A.shape[0]) != zero_rows[0]
        return ConstrainedZonotope(G, z.c, A[keep], b[keep])
    enc = _constraint_box_enclosure(A, b, z.n_gens)
    if enc is None:
        # propagation proved the set empty; any row can go
        return ConstrainedZonotope(G, z.c, A[:-1], b[:-1])
    e_lo, e_hi = enc.lo, enc.hi
    gen_norm = np.max(np.abs(G), axis=0) if G.size else np.zeros(z.n_gens)
    best = None
    for i in range(A.shape[0]):
        row = A[i]
        terms_lo = np.minimum(row * e_lo, row * e_hi)
        terms_hi = np.maximum(row * e_lo, row * e_hi)
        rest_lo = terms_lo.sum() - terms_lo
        rest_hi = terms_hi.sum() - terms_hi
        # rows are unit-normalized, so this is a relative pivot threshold
        cand = np.flatnonzero(np.abs(row) > 1e-6)
        if cand.size == 0:
            continue
        # implied range of xi_j: (b_i - rest) / row_j, endpoints ordered by sign
        r1 = (b[i] - rest_hi[cand]) / row[cand]
        r2 = (b[i] - rest_lo[cand]) / row[cand]
        reach_abs = np.maximum(np.abs(r1), np.abs(r2))
        excess = np.maximum(0.0, reach_abs - 1.0)
        # prefer eliminations whose implied range stays in the unit box,
        # weighted by how much of the set the generator carries; break ties
        # toward strong pivots for conditioning
        cost = excess * (gen_norm[cand] + 1e-12)
        finite = np.isfinite(cost)
        if not np.any(finite):
            continue
        idx = np.flatnonzero(finite)
        jbest = idx[int(np.lexsort((-np.abs(row[cand][idx]), cost[idx]))[0])]
        score = (float(cost[jbest]), -float(np.abs(row[cand][jbest])))
        if best is None or score < best[0]:
            best = (score, i, int(cand[jbest]))
    if best is None:
        return ConstrainedZonotope(G, z.c, A[:-1], b[:-1])
    _, i, j = best
    pivot = A[i, j]
    g_col = G[:, j]
    a_col = A[:, j]
    a_row = A[i]
    G2 = G - np.outer(g_col, a_row) / pivot
    c2 = z.c + g_col * (b[i] / pivot)
    A2 = A - np.outer(a_col, a_row) / pivot
    b2 = b - a_col * (b[i] / pivot)
    keep_rows = np.arange(A.shape[0]) != i
    keep_cols = np.arange(G.shape[1]) != j
    A2, b2 = _normalize_rows(A2[np.ix_(keep_rows, keep_cols)], b2[keep_rows])
    return ConstrainedZonotope(G2[:, keep_cols], c2, A2, b2)


def _girard_reduce(z: ConstrainedZonotope, max_gens: int) -> ConstrainedZonotope:
    """Generator reduction on the lifted zonotope [G; A] with the classic
    smallest ||.||_1 - ||.||_inf score; requires max_gens >= dim + n_cons."""
    ng = z.n_gens
    if ng <= max_gens:
        return z
    lifted = np.vstack([z.G, z.A])
    m = lifted.shape[0]
    n_keep = max_gens - m
    if n_keep < 0:
        raise ValueError("generator cap below lifted dimension; reduce constraints first")
    score = np.sum(np.abs(lifted), axis=0) - np.max(np.abs(lifted), axis=0)
    order = np.argsort(score, kind="stable")
    drop = order[: ng - n_keep]
    keep = np.setdiff1d(np.arange(ng), drop, assume_unique=False)
    box = np.diag(np.sum(np.abs(lifted[:, drop]), axis=1))
    new_lifted = np.hstack([lifted[:, keep], box])
    n = z.dim
    return drop_zero_generators(
        ConstrainedZonotope(new_lifted[:n], z.c, new_lifted[n:], z.b)
    )


def reduce(z: ConstrainedZonotope, max_gens: int, max_cons: int) -> ConstrainedZonotope:
    """Enclose Z by a set with at most ``max_gens`` generators and
    ``max_cons`` constraints.

    Constraint elimination removes one constraint and one generator per
    pass.  It runs until the constraint cap holds, and keeps running while
    the generator count is over its cap, since Girard-style reduction on
    the lifted zonotope cannot go below dim + n_cons generators; cutting
    constraints first both makes room and tends to lose less than folding
    live generators into a box.
    """
    if max_gens < z.dim:
        raise ValueError(f"max_gens={max_gens} below set dimension {z.dim}")
    if max_cons < 0:
        raise ValueError("max_cons must be non-negative")
    if z.n_gens <= max_gens and z.n_cons <= max_cons:
        return z
    if not (
        np.all(np.isfinite(z.G))
        and np.all(np.isfinite(z.c))
        and np.all(np.isfinite(z.A))
        and np.all(np.isfinite(z.b))
    ):
        raise NumericalFailure("non-finite set representation entering reduction")

    def tighten(zz: ConstrainedZonotope) -> ConstrainedZonotope:
        enc = _constraint_box_enclosure(zz.A, zz.b, zz.n_gens)
        if enc is not None:
            zz = drop_zero_generators(_rescale(zz, enc))
        return zz

    z = tighten(drop_zero_generators(z))
    while z.n_cons > max_cons:
        z = tighten(_eliminate_one_constraint(z))
    while z.n_gens > max_gens and z.n_cons > 0:
        z = tighten(_eliminate_one_constraint(z))
    z = drop_zero_generators(z)
    if z.n_gens > max_gens:
        z = _girard_reduce(z, max_gens)
    return z


def radius_1norm(z: ConstrainedZonotope) -> float:
    """Sum of the componentwise radii of the interval hull."""
    return float(np.sum(interval_hull(z).rad))


# --- serialization ---------------------------------------------------------


def cz_to_dict(z: ConstrainedZonotope) -> dict:
    return {
        "G": z.G.tolist(),
        "c": z.c.tolist(),
        "A": z.A.tolist(),
        "b": z.b.tolist(),
    }


def cz_from_dict(d: dict) -> ConstrainedZonotope:
    c = _vec(d["c"])
    G = _mat(d.get("G", []), rows=c.size)
    b = _vec(d.get("b", []))
    A = _mat(d.get("A", []), rows=b.size, cols=G.shape[1])
    return ConstrainedZonotope(G, c, A, b)


def hpoly_to_dict(p: HPolytope) -> dict:
    return {
        "H": p.H.tolist(),
        "k": p.k.tolist(),
        "Aeq": p.Aeq.tolist(),
        "beq": p.beq.tolist(),
    }


def hpoly_from_dict(d: dict) -> HPolytope:
    k = _vec(d.get("k", []))
    beq = _vec(d.get("beq", []))
    H = _mat(d.get("H", []), rows=k.size)
    Aeq = _mat(d.get("Aeq", []), rows=beq.size, cols=H.shape[1] if H.size else None)
    return HPolytope(H, k, Aeq, beq)


def save_cz(path: str, z: ConstrainedZonotope) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(cz_to_dict(z), fh)


def load_cz(path: str) -> ConstrainedZonotope:
    with open(path, "r", encoding="utf-8") as fh:
        return cz_from_dict(json.load(fh))
