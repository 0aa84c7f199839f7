"""Jitted phase-1 simplex kernel for the feasibility tests that dominate
the package's LP volume (set membership, audits).

Solves  min sum(a)  s.t.  A x + S a = b,  lo <= x <= hi,  a >= 0,  where S
is the diagonal sign matrix of the initial residual.  The optimum is the
minimum L1 violation of A x = b over the box.  Pure loops so numba can
compile it; the numpy implementation in :mod:`czreach.linprog` is the
reference and the fallback when numba is unavailable.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        if args and callable(args[0]):
            return args[0]
        return wrap

_PIVOT_TOL = 1e-10


@njit(cache=True)
def phase1_min_residual(A, b, lo, hi, opt_tol, bland_after, hard_cap, early_stop):  # pragma: no cover - compiled
    m, n = A.shape
    k = n + m

    sgn = np.empty(m)
    x = np.empty(k)
    for j in range(n):
        x[j] = lo[j]
    for i in range(m):
        r = b[i]
        for j in range(n):
            r -= A[i, j] * lo[j]
        if r >= 0.0:
            sgn[i] = 1.0
        else:
            sgn[i] = -1.0
        x[n + i] = abs(r)

    basis = np.empty(m, dtype=np.int64)
    for i in range(m):
        basis[i] = n + i
    at_upper = np.zeros(k, dtype=np.bool_)
    is_basic = np.zeros(k, dtype=np.bool_)
    for i in range(m):
        is_basic[n + i] = True

    binv = np.eye(m)  # basis of artificials: B = diag(sgn), inverse = diag(sgn)
    for i in range(m):
        binv[i, i] = sgn[i]

    y = np.empty(m)
    d = np.empty(k)
    w = np.empty(m)
    iters = 0
    while True:
        obj = 0.0
        for i in range(m):
            bi = basis[i]
            if bi >= n:
                obj += x[bi]
        if obj <= early_stop:
            return obj
        if iters > hard_cap:
            return -1.0  # breakdown marker; caller falls back

        # duals y = c_B' binv with c_B = 1 on artificial basics
        for jj in range(m):
            acc = 0.0
            for i in range(m):
                if basis[i] >= n:
                    acc += binv[i, jj]
            y[jj] = acc
        # reduced costs
        for j in range(n):
            acc = 0.0
            for i in range(m):
                acc += y[i] * A[i, j]
            d[j] = -acc
        for i in range(m):
            d[n + i] = 1.0 - y[i] * sgn[i]

        bland = iters >= bland_after
        e = -1
        best = 0.0
        for j in range(k):
            if is_basic[j]:
                continue
            if j < n:
                if hi[j] - lo[j] <= 0.0:
                    continue
                if at_upper[j]:
                    v = d[j]
                else:
                    v = -d[j]
            else:
                v = -d[j]  # artificials sit at their lower bound 0
            if v > opt_tol:
                if bland:
                    e = j
                    break
                if v > best:
                    best = v
                    e = j
        if e < 0:
            return obj

        s = -1.0 if (e < n and at_upper[e]) else 1.0

        # w = binv @ column(e)
        if e < n:
            for i in range(m):
                acc = 0.0
                for jj in range(m):
                    acc += binv[i, jj] * A[jj, e]
                w[i] = acc
        else:
            art = e - n
            for i in range(m):
                w[i] = binv[i, art] * sgn[art]

        # ratio test
        if e < n:
            delta = hi[e] - lo[e]
        else:
            delta = np.inf
        leave = -1
        best_piv = 0.0
        for i in range(m):
            dx = -s * w[i]
            bi = basis[i]
            if dx > _PIVOT_TOL:
                ub = hi[bi] if bi < n else np.inf
                cap = (ub - x[bi]) / dx
            elif dx < -_PIVOT_TOL:
                lb = lo[bi] if bi < n else 0.0
                cap = (lb - x[bi]) / dx
            else:
                continue
            if cap < 0.0:
                cap = 0.0
            if cap < delta - 1e-12:
                delta = cap
                leave = i
                best_piv = abs(dx)
            elif cap <= delta + 1e-12 and leave >= 0:
                if bland:
                    if basis[i] < basis[leave]:
                        leave = i
                        if cap < delta:
                            delta = cap
                elif abs(dx) > best_piv:
                    leave = i
                    best_piv = abs(dx)
                    if cap < delta:
                        delta = cap
        if not np.isfinite(delta):
            return -1.0  # phase 1 cannot be unbounded; numerical breakdown

        enter_val = x[e] + s * delta
        for i in range(m):
            x[basis[i]] += -s * w[i] * delta
        if leave < 0:
            at_upper[e] = not at_upper[e]
            x[e] = hi[e] if at_upper[e] else lo[e]
        else:
            lv = basis[leave]
            if -s * w[leave] > 0.0:
                at_upper[lv] = True
                x[lv] = hi[lv] if lv < n else 0.0
            else:
                at_upper[lv] = False
                x[lv] = lo[lv] if lv < n else 0.0
            is_basic[lv] = False
            basis[leave] = e
            is_basic[e] = True
            x[e] = enter_val

            piv = w[leave]
            if abs(piv) < _PIVOT_TOL:
                return -1.0
            for jj in range(m):
                row_val = binv[leave, jj] / piv
                for i in range(m):
                    if i != leave:
                        binv[i, jj] -= w[i] * row_val
                binv[leave, jj] = row_val
        iters += 1
        if iters % 60 == 0:
            # refresh the inverse and basic values to control drift
            B = np.empty((m, m))
            for pos in range(m):
                bi = basis[pos]
                if bi < n:
                    for i in range(m):
                        B[i, pos] = A[i, bi]
                else:
                    for i in range(m):
                        B[i, pos] = 0.0
                    B[bi - n, pos] = sgn[bi - n]
            binv = np.linalg.inv(B)
            rhs = np.empty(m)
            for i in range(m):
                acc = b[i]
                for j in range(k):
                    if not is_basic[j]:
                        if j < n:
                            acc -= A[i, j] * x[j]
                        elif j - n == i:
                            acc -= sgn[i] * x[j]
                rhs[i] = acc
            xb = binv @ rhs
            for pos in range(m):
                x[basis[pos]] = xb[pos]
