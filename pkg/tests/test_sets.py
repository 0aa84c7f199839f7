import numpy as np
import pytest

from czreach.errors import DimensionMismatch, EmptySetError
from czreach.intervals import Interval, IntervalVector
from czreach.sets import (
    ConstrainedZonotope,
    HPolytope,
    cartesian_product,
    contains_point,
    contains_points,
    cz_from_dict,
    cz_from_interval,
    cz_to_dict,
    drop_zero_generators,
    generalized_intersection,
    hpoly_from_dict,
    hpoly_intersection,
    hpoly_to_dict,
    interval_hull,
    intersect_hpoly,
    is_empty,
    linear_image,
    minkowski_sum,
    radius_1norm,
    reduce,
    sigma_lower_bound,
    support,
)

RNG = np.random.default_rng(20240607)


def unit_box(n):
    return ConstrainedZonotope(np.eye(n), np.zeros(n))


def random_cz(n, ng, nc, rng=RNG, scale=1.0):
    """Non-empty by construction: constraints anchored at an interior point."""
    G = rng.normal(size=(n, ng)) * scale
    c = rng.normal(size=n)
    if nc == 0:
        return ConstrainedZonotope(G, c)
    A = rng.normal(size=(nc, ng))
    xi0 = rng.uniform(-0.6, 0.6, size=ng)
    return ConstrainedZonotope(G, c, A, A @ xi0)


def sample_members(z, count, rng=RNG):
    """Hit-and-run over the feasible factor polytope; exact members up to
    floating point."""
    if z.n_cons == 0:
        xi = rng.uniform(-1, 1, size=(count, z.n_gens))
        return xi @ z.G.T + z.c
    # interior point by alternating projections (box <-> affine subspace)
    pinv = np.linalg.pinv(z.A)
    xi = np.zeros(z.n_gens)
    for _ in range(500):
        xi = xi - pinv @ (z.A @ xi - z.b)
        clipped = np.clip(xi, -0.999, 0.999)
        if np.allclose(clipped, xi, atol=1e-13):
            break
        xi = clipped
    xi = xi - pinv @ (z.A @ xi - z.b)
    assert np.max(np.abs(z.A @ xi - z.b)) < 1e-9, "no interior point found"
    assert np.max(np.abs(xi)) <= 1.0 + 1e-12, "no interior point found"
    ns = np.linalg.svd(z.A)[2][np.linalg.matrix_rank(z.A):].T
    pts = []
    for _ in range(count):
        for _ in range(4):  # a few walk steps decorrelate the samples
            if not ns.size:
                break
            d = ns @ rng.normal(size=ns.shape[1])
            nrm = np.linalg.norm(d)
            if nrm < 1e-12:
                continue
            d = d / nrm
            alo, ahi = -np.inf, np.inf
            for i in range(z.n_gens):
                if abs(d[i]) > 1e-14:
                    a1 = (-1.0 - xi[i]) / d[i]
                    a2 = (1.0 - xi[i]) / d[i]
                    alo = max(alo, min(a1, a2))
                    ahi = min(ahi, max(a1, a2))
            if not np.isfinite(alo) or not np.isfinite(ahi) or alo > ahi:
                continue
            xi = xi + rng.uniform(alo, ahi) * d
            xi = np.clip(xi, -1.0, 1.0)
        pts.append(z.c + z.G @ xi)
    return np.array(pts)


def test_cz_from_interval():
    v = IntervalVector.from_arrays([0, -1], [2, 1])
    z = cz_from_interval(v)
    assert np.allclose(z.G, np.diag([1, 1]))
    assert np.allclose(z.c, [1, 0])
    assert z.n_cons == 0
    # degenerate interval keeps its zero column
    z2 = cz_from_interval(IntervalVector([Interval(3, 3)]))
    assert z2.G.shape == (1, 1) and z2.G[0, 0] == 0.0
    z3 = cz_from_interval(IntervalVector.from_arrays([-1, -1, -1], [1, 1, 1]))
    assert np.allclose(z3.G, np.eye(3)) and np.allclose(z3.c, 0)


def test_cartesian_product_structure_and_semantics():
    z = cz_from_interval(IntervalVector([Interval(-1, 1)]))
    w = cz_from_interval(IntervalVector([Interval(0, 2)]))
    zw = cartesian_product(z, w)
    hull = interval_hull(zw)
    assert np.allclose(hull.lo, [-1, 0]) and np.allclose(hull.hi, [1, 2])

    a = random_cz(2, 4, 1)
    b = random_cz(1, 3, 1)
    ab = cartesian_product(a, b)
    assert ab.n_gens == a.n_gens + b.n_gens
    assert ab.n_cons == a.n_cons + b.n_cons
    pa = sample_members(a, 20)
    pb = sample_members(b, 20)
    for i in range(20):
        joint = np.concatenate([pa[i], pb[i]])
        assert contains_point(ab, joint, tol=1e-7)


def test_linear_image():
    z = random_cz(3, 5, 2)
    assert np.allclose(linear_image(np.eye(3), z).G, z.G)
    z0 = linear_image(np.zeros((2, 3)), z)
    hull = interval_hull(z0)
    assert np.allclose(hull.lo, 0) and np.allclose(hull.hi, 0)
    sel = np.array([[0.0, 1.0, 0.0]])
    proj = linear_image(sel, z)
    for x in sample_members(z, 30):
        assert contains_point(proj, [x[1]], tol=1e-7)
    with pytest.raises(DimensionMismatch):
        linear_image(np.eye(2), z)


def test_minkowski_sum():
    z = unit_box(1)
    zero = ConstrainedZonotope(np.zeros((1, 0)), np.zeros(1))
    s = minkowski_sum(z, zero)
    h = interval_hull(s)
    assert np.allclose([h.lo[0], h.hi[0]], [-1, 1])
    s2 = minkowski_sum(unit_box(1), unit_box(1))
    h2 = interval_hull(s2)
    assert np.allclose([h2.lo[0], h2.hi[0]], [-2, 2])
    # hull additivity for plain zonotopes
    for _ in range(10):
        a = random_cz(2, 3, 0)
        b = random_cz(2, 4, 0)
        ha, hb = interval_hull(a), interval_hull(b)
        hs = interval_hull(minkowski_sum(a, b))
        assert np.allclose(hs.lo, ha.lo + hb.lo, atol=1e-9)
        assert np.allclose(hs.hi, ha.hi + hb.hi, atol=1e-9)
    with pytest.raises(DimensionMismatch):
        minkowski_sum(unit_box(1), unit_box(2))


def test_generalized_intersection():
    z = unit_box(2)
    y = ConstrainedZonotope(np.eye(2), np.array([1.0, 1.0]))  # box [0,2]^2
    zi = generalized_intersection(z, y, np.eye(2))
    hull = interval_hull(zi)
    assert np.allclose(hull.lo, [0, 0], atol=1e-8)
    assert np.allclose(hull.hi, [1, 1], atol=1e-8)
    # Y containing Z leaves membership unchanged
    big = ConstrainedZonotope(10 * np.eye(2), np.zeros(2))
    zi2 = generalized_intersection(z, big, np.eye(2))
    for x in sample_members(z, 50):
        assert contains_point(zi2, x, tol=1e-7)
    # disjoint target empties the intersection
    far = ConstrainedZonotope(0.1 * np.eye(2), np.array([10.0, 10.0]))
    zi3 = generalized_intersection(z, far, np.eye(2))
    assert is_empty(zi3)
    with pytest.raises(EmptySetError):
        interval_hull(zi3)


def test_hpoly_intersection():
    p = HPolytope(H=[[1.0, 0.0], [0.0, 1.0]], k=[1.0, 1.0])
    q = HPolytope(H=[[-1.0, 0.0], [0.0, -1.0], [1.0, 1.0]], k=[0.0, 0.0, 1.5])
    pq = hpoly_intersection(p, q)
    assert pq.n_half == 5
    for _ in range(100):
        x = RNG.uniform(-1.5, 1.5, size=2)
        assert pq.contains(x) == (p.contains(x) and q.contains(x))
    pp = hpoly_intersection(p, p)
    for _ in range(50):
        x = RNG.uniform(-2, 2, size=2)
        assert pp.contains(x) == p.contains(x)


def test_interval_hull_cases():
    # constraint pinning the generators to a point
    z = ConstrainedZonotope(np.eye(2), np.zeros(2), np.array([[1.0, 1.0]]), np.array([2.0]))
    hull = interval_hull(z)
    assert np.allclose(hull.lo, [1, 1], atol=1e-7)
    assert np.allclose(hull.hi, [1, 1], atol=1e-7)
    # unconstrained closed form
    z2 = random_cz(3, 6, 0)
    hull2 = interval_hull(z2)
    spread = np.sum(np.abs(z2.G), axis=1)
    assert np.allclose(hull2.lo, z2.c - spread)
    assert np.allclose(hull2.hi, z2.c + spread)
    # constrained hulls dominate rejection-sampled member coordinates
    for _ in range(5):
        z3 = random_cz(2, 5, 2)
        hull3 = interval_hull(z3)
        pts = sample_members(z3, 200)
        assert np.all(pts >= hull3.lo - 1e-8)
        assert np.all(pts <= hull3.hi + 1e-8)


def test_interval_hull_faces_are_attained():
    for _ in range(5):
        z = random_cz(2, 6, 2)
        hull = interval_hull(z)
        for i in range(z.dim):
            lo_val, _ = support(z, np.eye(z.dim)[i], lower=True)
            hi_val, _ = support(z, np.eye(z.dim)[i], lower=False)
            assert lo_val == pytest.approx(hull.lo[i], abs=1e-6)
            assert hi_val == pytest.approx(hull.hi[i], abs=1e-6)


def test_contains_point():
    z = random_cz(2, 5, 0)
    assert contains_point(z, z.c)
    hull = interval_hull(z)
    outside = hull.hi + 1.0
    assert not contains_point(z, outside)
    # hand-built 2-D case: unit box as a CZ vs direct halfspace evaluation
    box = unit_box(2)
    for _ in range(200):
        x = RNG.uniform(-1.5, 1.5, size=2)
        assert contains_point(box, x, tol=1e-9) == bool(np.all(np.abs(x) <= 1 + 1e-9))
    with pytest.raises(DimensionMismatch):
        contains_point(box, [0.0, 0.0, 0.0])


def test_contains_points_batch():
    z = random_cz(2, 6, 2)
    members = sample_members(z, 40)
    hull = interval_hull(z)
    far = hull.hi + np.abs(hull.hi) + 1.0
    pts = np.vstack([members, far])
    got = contains_points(z, pts, tol=1e-7)
    assert np.all(got[:-1])
    assert not got[-1]


def test_intersect_hpoly_whole_space_and_clip():
    z = unit_box(2)
    p = HPolytope.whole_space(2)
    zi = intersect_hpoly(z, p)
    assert zi.n_gens == z.n_gens and zi.n_cons == 0
    assert np.allclose(zi.G, z.G)

    clip = HPolytope(H=[[1.0, 0.0]], k=[0.0])
    zc = intersect_hpoly(z, clip)
    assert zc.n_gens == z.n_gens + 1
    assert zc.n_cons == z.n_cons + 1
    for _ in range(1000):
        x = RNG.uniform(-1.3, 1.3, size=2)
        expect = np.all(np.abs(x) <= 1) and x[0] <= 0
        got = contains_point(zc, x, tol=1e-7)
        if expect != got:
            # tolerate boundary cases only
            assert min(abs(x[0]), abs(1 - np.abs(x)).min()) < 1e-6
    # equality-only polytope forcing x1 = x2
    peq = HPolytope(Aeq=[[1.0, -1.0]], beq=[0.0])
    ze = intersect_hpoly(z, peq)
    hull = interval_hull(ze)
    assert hull.lo[0] == pytest.approx(hull.lo[1], abs=1e-7)
    assert hull.hi[0] == pytest.approx(hull.hi[1], abs=1e-7)


def test_intersect_hpoly_bookkeeping():
    # generator/constraint growth is linear in the halfspace count
    for _ in range(10):
        z = random_cz(3, 6, 2)
        nh, ncp = int(RNG.integers(1, 5)), int(RNG.integers(0, 3))
        H = RNG.normal(size=(nh, 3))
        k = H @ z.c + RNG.uniform(0.5, 2.0, size=nh)
        Aeq = RNG.normal(size=(ncp, 3))
        beq = Aeq @ z.c
        p = HPolytope(H, k, Aeq, beq)
        zi = intersect_hpoly(z, p)
        assert zi.n_gens == z.n_gens + nh
        assert zi.n_cons == z.n_cons + nh + ncp


def test_prop1_oracle_equivalence_small():
    # randomized check of the CZ/H-rep intersection against joint membership;
    # continuous sampling makes boundary coincidences a measure-zero event
    for trial in range(20):
        n = int(RNG.integers(2, 4))
        z = random_cz(n, n + 2, 1)
        H = RNG.normal(size=(2, n))
        k = H @ z.c + RNG.uniform(-0.2, 1.0, size=2)
        p = HPolytope(H, k)
        hull = interval_hull(z)
        pts = RNG.uniform(hull.lo - 0.3, hull.hi + 0.3, size=(60, n))
        for mode in ("interval", "lp"):
            zi = intersect_hpoly(z, p, sigma_mode=mode)
            for x in pts:
                joint = contains_point(z, x, tol=1e-6) and p.contains(x, tol=1e-6)
                got = contains_point(zi, x, tol=1e-6)
                assert joint == got, f"trial {trial} mode {mode}: {x}"


def test_sigma_modes():
    z = unit_box(2)
    sig = sigma_lower_bound(z, np.eye(2), "interval")
    assert np.allclose(sig, [-1, -1])
    # lp mode is at least as tight
    for _ in range(20):
        zz = random_cz(2, 5, 2)
        H = RNG.normal(size=(3, 2))
        si = sigma_lower_bound(zz, H, "interval")
        sl = sigma_lower_bound(zz, H, "lp")
        assert np.all(sl >= si - 1e-9)
        # both are valid lower bounds on H x over the set
        for x in sample_members(zz, 30):
            assert np.all(H @ x >= sl - 1e-7)
            assert np.all(H @ x >= si - 1e-7)
    # singleton: lp sigma is the exact support
    zp = ConstrainedZonotope(
        np.eye(2), np.zeros(2), np.array([[1.0, 1.0]]), np.array([2.0])
    )
    sp = sigma_lower_bound(zp, np.eye(2), "lp")
    assert np.allclose(sp, [1.0, 1.0], atol=1e-7)


def test_reduce_within_limits_is_identity():
    z = random_cz(2, 5, 2)
    assert reduce(z, 8, 20) is z


def test_reduce_containment():
    for trial in range(25):
        n = int(RNG.integers(2, 4))
        ng = int(RNG.integers(n + 3, 14))
        nc = int(RNG.integers(0, min(5, ng - n)))
        z = random_cz(n, ng, nc)
        members = sample_members(z, 60)
        zr = reduce(z, max_gens=max(n, 5), max_cons=2)
        assert zr.n_gens <= max(n, 5)
        assert zr.n_cons <= 2
        got = contains_points(zr, members, tol=1e-6)
        assert np.all(got), f"containment broken on trial {trial}"


def test_reduce_to_zonotope():
    z = random_cz(2, 8, 3)
    members = sample_members(z, 80)
    zr = reduce(z, 8, 0)
    assert zr.n_cons == 0
    assert np.all(contains_points(zr, members, tol=1e-6))


def test_drop_zero_generators():
    G = np.array([[1.0, 0.0, 2.0], [0.0, 0.0, 1.0]])
    z = ConstrainedZonotope(G, np.zeros(2))
    z2 = drop_zero_generators(z)
    assert z2.n_gens == 2


def test_radius_1norm():
    assert radius_1norm(unit_box(2)) == pytest.approx(2.0)
    singleton = ConstrainedZonotope(np.zeros((2, 1)), np.array([3.0, -1.0]))
    assert radius_1norm(singleton) == pytest.approx(0.0, abs=1e-9)
    z = random_cz(2, 5, 2)
    hull = interval_hull(z)
    assert radius_1norm(z) == pytest.approx(float(np.sum(hull.rad)), abs=1e-9)


def test_serialization_round_trip():
    z = random_cz(3, 5, 2)
    z2 = cz_from_dict(cz_to_dict(z))
    assert np.allclose(z.G, z2.G) and np.allclose(z.c, z2.c)
    assert np.allclose(z.A, z2.A) and np.allclose(z.b, z2.b)
    p = HPolytope(H=[[1.0, 0.0]], k=[2.0], Aeq=[[0.0, 1.0]], beq=[0.5])
    p2 = hpoly_from_dict(hpoly_to_dict(p))
    assert np.allclose(p.H, p2.H) and np.allclose(p.k, p2.k)
    assert np.allclose(p.Aeq, p2.Aeq) and np.allclose(p.beq, p2.beq)
