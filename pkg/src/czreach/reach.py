"""Reachability engine: set propagation through factorable dynamics.

One step encloses f over a constrained-zonotope domain X by (1) taking the
interval hull of X, (2) bounding every factor by natural interval
extension, (3) building the lifted halfspace relaxation P, and (4)
intersecting the lifted set X x Z~ with P before projecting onto the
outputs.  The recursion applies this step horizon-many times with
complexity reduction after each step.

Baselines: plain natural interval extension (ia) and the mean-value
extension with interval Jacobians (czmv).
"""

from __future__ import annotations

from dataclasses import dataclass
from time import perf_counter

import numpy as np

from .errors import CzReachError, DimensionMismatch, DomainError, EmptySetError, NumericalFailure
from .factorable import (
    FactorGraph,
    eval_interval,
    eval_interval_jacobian,
    eval_real,
)
from .intervals import IntervalVector
from .relax import LiftedPolytope, build_lifted_polytope
from .sets import (
    ConstrainedZonotope,
    SigmaMode,
    cartesian_product,
    cz_from_interval,
    interval_hull,
    intersect_hpoly,
    linear_image,
    minkowski_sum,
    radius_1norm,
    reduce,
)

DEFAULT_MAX_GENS = 8
DEFAULT_MAX_CONS = 20


@dataclass(frozen=True)
class ReachProblem:
    """Dynamics x+ = f(x, w) as one factor graph over (x1..xn, w1..wm)."""

    graph: FactorGraph
    n_x: int
    n_w: int
    X0: ConstrainedZonotope
    W: ConstrainedZonotope | None
    horizon: int

    def __post_init__(self):
        if self.graph.n_inputs != self.n_x + self.n_w:
            raise DimensionMismatch(
                f"graph has {self.graph.n_inputs} inputs, expected {self.n_x + self.n_w}"
            )
        if self.graph.n_outputs != self.n_x:
            raise DimensionMismatch(
                f"graph has {self.graph.n_outputs} outputs, expected {self.n_x}"
            )
        if self.X0.dim != self.n_x:
            raise DimensionMismatch(f"X0 has dim {self.X0.dim}, expected {self.n_x}")
        if self.n_w == 0:
            if self.W is not None:
                raise DimensionMismatch("W given but n_w = 0")
        elif self.W is None or self.W.dim != self.n_w:
            raise DimensionMismatch(f"W must have dim {self.n_w}")
        if self.horizon < 0:
            raise ValueError("horizon must be non-negative")


@dataclass(frozen=True)
class ReachOptions:
    max_gens: int = DEFAULT_MAX_GENS
    max_cons: int = DEFAULT_MAX_CONS
    sigma_mode: SigmaMode = "interval"


@dataclass(frozen=True)
class StepStats:
    k: int
    n_g_pre: int
    n_c_pre: int
    n_g_post: int
    n_c_post: int
    millis: float
    n_z: int = 0
    n_h_p: int = 0
    n_c_p: int = 0


@dataclass(frozen=True)
class ReachResult:
    method: str
    enclosures: tuple[ConstrainedZonotope, ...]
    radii: tuple[float, ...]
    stats: tuple[StepStats, ...]

    @property
    def steps_completed(self) -> int:
        return len(self.enclosures) - 1


class ReachAborted(CzReachError):
    """A step failed; ``partial`` holds everything computed before it."""

    def __init__(self, step: int, partial: ReachResult, cause: Exception):
        super().__init__(f"aborted at step {step}: {cause}")
        self.step = step
        self.partial = partial
        self.cause = cause


_STEP_ERRORS = (EmptySetError, DomainError, NumericalFailure)


def propagate_cz(
    g: FactorGraph,
    X: ConstrainedZonotope,
    *,
    sigma_mode: SigmaMode = "interval",
) -> tuple[ConstrainedZonotope, LiftedPolytope]:
    """One nonlinear image enclosure: E ((X x Z~) cap P).

    Returns the output enclosure and the lifted polytope (whose row counts
    drive the complexity bookkeeping).
    """
    if X.dim != g.n_inputs:
        raise DimensionMismatch(f"domain dim {X.dim}, graph inputs {g.n_inputs}")
    hull = interval_hull(X)
    lifted = build_lifted_polytope(g, hull)
    nz, n = g.n_factors, g.n_inputs
    if nz > n:
        tail = cz_from_interval(lifted.factor_bounds.slice(n))
        joint = cartesian_product(X, tail)
    else:
        joint = X
    inter = intersect_hpoly(joint, lifted.poly, sigma_mode)
    out = linear_image(g.output_selector(), inter)
    return out, lifted


def reach(problem: ReachProblem, opts: ReachOptions = ReachOptions()) -> ReachResult:
    """Algorithm: X_k = red( E ((X_{k-1} x W x Z~) cap P) ) for k = 1..N."""
    g = problem.graph
    enclosures = [problem.X0]
    radii = [radius_1norm(problem.X0)]
    stats: list[StepStats] = []

    def partial() -> ReachResult:
        return ReachResult("alg1", tuple(enclosures), tuple(radii), tuple(stats))

    for k in range(1, problem.horizon + 1):
        t0 = perf_counter()
        try:
            domain = (
                cartesian_product(enclosures[-1], problem.W)
                if problem.W is not None
                else enclosures[-1]
            )
            raw, lifted = propagate_cz(g, domain, sigma_mode=opts.sigma_mode)
            reduced = reduce(raw, opts.max_gens, opts.max_cons)
            rad = radius_1norm(reduced)
        except _STEP_ERRORS as exc:
            raise ReachAborted(k, partial(), exc) from exc
        stats.append(
            StepStats(
                k=k,
                n_g_pre=raw.n_gens,
                n_c_pre=raw.n_cons,
                n_g_post=reduced.n_gens,
                n_c_post=reduced.n_cons,
                millis=(perf_counter() - t0) * 1e3,
                n_z=g.n_factors,
                n_h_p=lifted.poly.n_half,
                n_c_p=lifted.poly.n_eq,
            )
        )
        enclosures.append(reduced)
        radii.append(rad)
    return partial()


def baseline_ia(problem: ReachProblem) -> list[IntervalVector]:
    """Natural interval extension of f iterated from the hull of X0."""
    g = problem.graph
    boxes = [interval_hull(problem.X0)]
    w_hull = interval_hull(problem.W) if problem.W is not None else None
    for _ in range(problem.horizon):
        joint = boxes[-1].concat(w_hull) if w_hull is not None else boxes[-1]
        z = eval_interval(g, joint)
        boxes.append(IntervalVector([z[j] for j in g.outputs]))
    return boxes


def ia_radii(boxes: list[IntervalVector]) -> list[float]:
    return [float(np.sum(b.rad)) for b in boxes]


def baseline_czmv(problem: ReachProblem, opts: ReachOptions = ReachOptions()) -> ReachResult:
    """Mean-value extension: f(m) + J_x (X - m_x) + J_w (W - m_w) with an
    interval Jacobian over the current hulls.

    The interval-matrix/set product uses the midpoint matrix as a linear
    image plus a box bounding the radius-matrix remainder.
    """
    g = problem.graph
    n_x, n_w = problem.n_x, problem.n_w
    enclosures = [problem.X0]
    radii = [radius_1norm(problem.X0)]
    stats: list[StepStats] = []

    def partial() -> ReachResult:
        return ReachResult("czmv", tuple(enclosures), tuple(radii), tuple(stats))

    w_hull = interval_hull(problem.W) if problem.W is not None else None
    for k in range(1, problem.horizon + 1):
        t0 = perf_counter()
        try:
            x_hull = interval_hull(enclosures[-1])
            joint = x_hull.concat(w_hull) if w_hull is not None else x_hull
            J = eval_interval_jacobian(g, joint)
            m = joint.mid
            fm = eval_real(g, m)
            M, R = J.mid, J.rad
            u = np.maximum(np.abs(joint.lo - m), np.abs(joint.hi - m))

            centered = ConstrainedZonotope(
                enclosures[-1].G, enclosures[-1].c - m[:n_x], enclosures[-1].A, enclosures[-1].b
            )
            acc = linear_image(M[:, :n_x], centered)
            eta_x = R[:, :n_x] @ u[:n_x]
            acc = minkowski_box(acc, eta_x)
            if problem.W is not None:
                w_centered = ConstrainedZonotope(
                    problem.W.G, problem.W.c - m[n_x:], problem.W.A, problem.W.b
                )
                acc = minkowski_sum(acc, linear_image(M[:, n_x:], w_centered))
                acc = minkowski_box(acc, R[:, n_x:] @ u[n_x:])
            raw = ConstrainedZonotope(acc.G, acc.c + fm, acc.A, acc.b)
            reduced = reduce(raw, opts.max_gens, opts.max_cons)
            rad = radius_1norm(reduced)
        except _STEP_ERRORS as exc:
            raise ReachAborted(k, partial(), exc) from exc
        stats.append(
            StepStats(
                k=k,
                n_g_pre=raw.n_gens,
                n_c_pre=raw.n_cons,
                n_g_post=reduced.n_gens,
                n_c_post=reduced.n_cons,
                millis=(perf_counter() - t0) * 1e3,
            )
        )
        enclosures.append(reduced)
        radii.append(rad)
    return partial()


def minkowski_box(z: ConstrainedZonotope, eta: np.ndarray) -> ConstrainedZonotope:
    """Minkowski-add the centered axis box with half-widths eta."""
    return minkowski_sum(z, ConstrainedZonotope(np.diag(eta), np.zeros(eta.size)))
