import itertools

import numpy as np
import pytest

from czreach.errors import DimensionMismatch
from czreach.linprog import (
    LinearProgram,
    LpStatus,
    feasible,
    min_infeasibility,
    solve,
    solve_arrays,
)

RNG = np.random.default_rng(987123)


def brute_force_min(c, A, b, lo, hi, tol=1e-9):
    """Enumerate basic feasible points: every subset of columns solved against
    the equalities with the rest pinned at a bound."""
    c = np.asarray(c, float)
    A = np.atleast_2d(np.asarray(A, float))
    b = np.asarray(b, float).ravel()
    n = c.size
    m = A.shape[0] if A.size else 0
    best = None
    if m == 0:
        x = np.where(c > 0, lo, hi)
        return float(c @ x)
    for basis in itertools.combinations(range(n), m):
        B = A[:, basis]
        if np.linalg.matrix_rank(B) < m:
            continue
        rest = [j for j in range(n) if j not in basis]
        for corner in itertools.product(*[(lo[j], hi[j]) for j in rest]):
            rhs = b - A[:, rest] @ np.array(corner) if rest else b.copy()
            xb = np.linalg.solve(B, rhs)
            x = np.empty(n)
            x[list(basis)] = xb
            x[rest] = corner
            if np.all(x >= lo - tol) and np.all(x <= hi + tol):
                v = float(c @ x)
                if best is None or v < best:
                    best = v
    return best


def test_box_vertex():
    out = solve_arrays([1.0, 0.0], [], [])
    assert out.status == LpStatus.OPTIMAL
    assert out.value == pytest.approx(-1.0)


def test_symmetric_equality():
    out = solve_arrays([1.0, 1.0], [[1.0, -1.0]], [0.0])
    assert out.status == LpStatus.OPTIMAL
    assert out.value == pytest.approx(-2.0, abs=1e-8)
    assert np.allclose(out.point, [-1.0, -1.0], atol=1e-8)


def test_infeasible_sum():
    out = solve_arrays([1.0, 0.0], [[1.0, 1.0]], [3.0])
    assert out.status == LpStatus.INFEASIBLE


def test_solve_dataclass_entry():
    lp = LinearProgram(
        objective=np.array([0.0, -1.0]),
        eq_lhs=np.array([[1.0, 1.0]]),
        eq_rhs=np.array([1.0]),
        box_lo=np.array([-1.0, -1.0]),
        box_hi=np.array([1.0, 1.0]),
    )
    out = solve(lp)
    assert out.status == LpStatus.OPTIMAL
    assert out.value == pytest.approx(-1.0, abs=1e-8)
    assert out.point @ np.array([1.0, 1.0]) == pytest.approx(1.0, abs=1e-9)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        solve_arrays([1.0, 2.0], [[1.0]], [0.0])


def test_feasible_examples():
    assert feasible(np.zeros((0, 3)), np.zeros(0))
    assert not feasible([[1.0]], [2.0])
    assert feasible([[1.0, 1.0]], [1.5])


def test_feasibility_against_edge_enumeration():
    # one random hyperplane against the box in n <= 3: compare with a dense
    # grid of points on the hyperplane clipped to the box
    for _ in range(50):
        n = int(RNG.integers(1, 4))
        a = RNG.normal(size=n)
        b = RNG.uniform(-1.5, 1.5) * np.sum(np.abs(a))
        got = feasible(a.reshape(1, -1), [b])
        # brute force: the hyperplane meets the box iff min a.x <= b <= max a.x
        lo = -np.sum(np.abs(a))
        hi = np.sum(np.abs(a))
        expect = lo - 1e-9 <= b <= hi + 1e-9
        assert got == expect


def test_min_infeasibility_values():
    assert min_infeasibility([[1.0]], [2.0]) == pytest.approx(1.0, abs=1e-9)
    assert min_infeasibility([[1.0]], [0.5]) == pytest.approx(0.0, abs=1e-9)


def test_random_lps_match_brute_force():
    for trial in range(120):
        n = int(RNG.integers(1, 5))
        m = int(RNG.integers(0, min(n, 3) + 1))
        c = RNG.normal(size=n)
        A = RNG.normal(size=(m, n))
        lo = np.full(n, -1.0)
        hi = np.full(n, 1.0)
        # anchor the rhs at a feasible interior point
        x0 = RNG.uniform(-0.8, 0.8, size=n)
        b = A @ x0 if m else np.zeros(0)
        out = solve_arrays(c, A, b)
        assert out.status == LpStatus.OPTIMAL, f"trial {trial}"
        expect = brute_force_min(c, A, b, lo, hi)
        assert expect is not None
        assert out.value == pytest.approx(expect, abs=1e-6), f"trial {trial}"
        # the optimizer must satisfy the constraints
        if m:
            assert np.max(np.abs(A @ out.point - b)) < 1e-8
        assert np.all(np.abs(out.point) <= 1 + 1e-9)


def test_bracketing_of_feasible_samples():
    for _ in range(30):
        n = int(RNG.integers(2, 5))
        m = int(RNG.integers(1, n))
        c = RNG.normal(size=n)
        A = RNG.normal(size=(m, n))
        x0 = RNG.uniform(-0.5, 0.5, size=n)
        b = A @ x0
        lo_out = solve_arrays(c, A, b)
        hi_out = solve_arrays(-c, A, b)
        assert lo_out.status == LpStatus.OPTIMAL and hi_out.status == LpStatus.OPTIMAL
        # sample feasible points via the anchor plus null-space moves
        ns = np.linalg.svd(A)[2][m:].T
        for _ in range(20):
            step = ns @ RNG.uniform(-1, 1, size=ns.shape[1]) if ns.size else 0.0
            x = np.clip(x0 + step, -1, 1)
            if np.max(np.abs(A @ x - b)) > 1e-9:
                continue
            v = float(c @ x)
            assert lo_out.value - 1e-7 <= v <= -hi_out.value + 1e-7


def test_unbounded_detection():
    out = solve_arrays(
        [1.0, 0.0],
        np.zeros((0, 2)),
        np.zeros(0),
        lo=[-np.inf, -1.0],
        hi=[np.inf, 1.0],
    )
    assert out.status == LpStatus.UNBOUNDED

    out2 = solve_arrays(
        [1.0, 1.0],
        [[1.0, -1.0]],
        [0.0],
        lo=[-np.inf, -np.inf],
        hi=[np.inf, np.inf],
    )
    assert out2.status == LpStatus.UNBOUNDED


def test_degenerate_and_overdetermined():
    # consistent overdetermined system: two copies of the same plane
    out = solve_arrays([1.0, 0.0], [[1.0, 1.0], [2.0, 2.0]], [1.0, 2.0])
    assert out.status == LpStatus.OPTIMAL
    assert out.value == pytest.approx(0.0, abs=1e-8)
    # inconsistent copies
    out = solve_arrays([1.0, 0.0], [[1.0, 1.0], [1.0, 1.0]], [1.0, 1.5])
    assert out.status == LpStatus.INFEASIBLE
    # equality pinning a single variable
    out = solve_arrays([0.0, 1.0], [[1.0, 0.0]], [0.25])
    assert out.status == LpStatus.OPTIMAL
    assert out.point[0] == pytest.approx(0.25, abs=1e-9)
