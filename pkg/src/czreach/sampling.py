"""Uniform sampling from constrained zonotopes and containment audits.

Sampling happens in factor space: plain rejection against a thin band
around A xi = b where that has a chance of terminating, otherwise the
feasible set is parameterized over the null space of A and rejection runs
in that lower-dimensional coordinate box (uniform on the slice polytope).
Audits propagate the samples through the dynamics and check membership in
every step's enclosure by feasibility LP.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linprog
from .errors import SamplingStarved
from .factorable import eval_real_batch
from .reach import ReachProblem, ReachResult
from .sets import ConstrainedZonotope, contains_points, interval_hull

REJECTION_BAND = 1e-9
MAX_ATTEMPTS = 10**7


def _null_space(A: np.ndarray) -> np.ndarray:
    if A.size == 0:
        return np.eye(A.shape[1])
    u, s, vt = np.linalg.svd(A)
    rank = int(np.sum(s > 1e-11 * max(1.0, s[0] if s.size else 1.0)))
    return vt[rank:].T


def sample_cz(
    z: ConstrainedZonotope,
    count: int,
    rng: np.random.Generator,
    *,
    band: float = REJECTION_BAND,
    max_attempts: int = MAX_ATTEMPTS,
) -> np.ndarray:
    """Uniform-ish samples of Z as an array of shape (count, dim)."""
    if count == 0:
        return np.zeros((0, z.dim))
    ng = z.n_gens
    if z.n_cons == 0:
        xi = rng.uniform(-1.0, 1.0, size=(count, ng))
        return xi @ z.G.T + z.c
    # plain rejection only pays off when the band has real volume
    batch = 4096
    attempts = 0
    hits: list[np.ndarray] = []
    got = 0
    while attempts < min(max_attempts, 64 * batch) and got < count:
        xi = rng.uniform(-1.0, 1.0, size=(batch, ng))
        attempts += batch
        res = np.max(np.abs(xi @ z.A.T - z.b), axis=1)
        ok = xi[res <= band]
        if ok.size:
            hits.append(ok)
            got += ok.shape[0]
        elif attempts >= 8 * batch:
            break  # hopeless band; switch to the null-space parameterization
    if got >= count:
        xi = np.vstack(hits)[:count]
        return xi @ z.G.T + z.c

    ns = _null_space(z.A)
    d = ns.shape[1]
    xi0, *_ = np.linalg.lstsq(z.A, z.b, rcond=None)
    if np.max(np.abs(z.A @ xi0 - z.b)) > 1e-7 * max(1.0, float(np.max(np.abs(z.b)))):
        raise SamplingStarved("constraints are inconsistent; the set is empty")
    if d == 0:
        if np.max(np.abs(xi0)) > 1.0 + 1e-9:
            raise SamplingStarved("constraints pin the factors outside the unit box")
        return np.tile(z.c + z.G @ np.clip(xi0, -1, 1), (count, 1))
    # coordinate box of the slice polytope in null-space coordinates, via LPs
    t_lo = np.empty(d)
    t_hi = np.empty(d)
    for i in range(d):
        lo_out = linprog.solve_arrays(ns[:, i], z.A, z.b)
        hi_out = linprog.solve_arrays(-ns[:, i], z.A, z.b)
        if lo_out.status != linprog.LpStatus.OPTIMAL or hi_out.status != linprog.LpStatus.OPTIMAL:
            raise SamplingStarved("feasible factor set is empty")
        ref = float(ns[:, i] @ xi0)
        t_lo[i] = lo_out.value - ref
        t_hi[i] = -hi_out.value - ref
    span = np.maximum(t_hi - t_lo, 0.0)
    pts = np.empty((count, z.dim))
    got = 0
    attempts = 0
    while got < count:
        if attempts >= max_attempts:
            raise SamplingStarved(
                "rejection in null-space coordinates starved; the feasible set "
                "is too thin even for the hull-box fallback"
            )
        t = rng.uniform(0.0, 1.0, size=(batch, d)) * span + t_lo
        attempts += batch
        xi = xi0 + t @ ns.T
        ok = np.max(np.abs(xi), axis=1) <= 1.0 + 1e-12
        take = xi[ok][: count - got]
        if take.size:
            pts[got : got + take.shape[0]] = take @ z.G.T + z.c
            got += take.shape[0]
    return pts


@dataclass(frozen=True)
class AuditStep:
    k: int
    violations: int
    min_hull_margin: float
    mean_hull_margin: float


@dataclass(frozen=True)
class AuditReport:
    samples: int
    seed: int
    tol: float
    violations: int
    steps: tuple[AuditStep, ...]

    @property
    def passed(self) -> bool:
        return self.violations == 0


def audit_containment(
    problem: ReachProblem,
    result: ReachResult,
    samples: int,
    seed: int,
    *,
    tol: float = 1e-6,
) -> AuditReport:
    """Propagate uniform samples of X0 through the true dynamics and check
    membership in each step enclosure by feasibility LP.

    Hull margins (distance from each propagated sample to the enclosure's
    interval-hull boundary) are reported as a cheap per-step health metric.
    """
    rng = np.random.default_rng(seed)
    steps: list[AuditStep] = []
    total = 0
    if samples == 0 or result.steps_completed == 0:
        return AuditReport(samples, seed, tol, 0, tuple())
    pts = sample_cz(problem.X0, samples, rng)
    for k in range(1, result.steps_completed + 1):
        if problem.W is not None:
            w = sample_cz(problem.W, samples, rng)
            joint = np.hstack([pts, w])
        else:
            joint = pts
        pts = eval_real_batch(problem.graph, joint)
        enc = result.enclosures[k]
        member = contains_points(enc, pts, tol=tol)
        bad = int(np.sum(~member))
        total += bad
        hull = interval_hull(enc)
        margins = np.minimum(pts - hull.lo, hull.hi - pts).min(axis=1)
        steps.append(
            AuditStep(
                k=k,
                violations=bad,
                min_hull_margin=float(margins.min()),
                mean_hull_margin=float(margins.mean()),
            )
        )
    return AuditReport(samples, seed, tol, total, tuple(steps))
