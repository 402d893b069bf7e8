"""Dense two-phase tableau simplex with Bland's rule.

Sized for the restricted dual of the cutting-plane method: a handful of
variables and a few hundred cuts at most.
"""

from __future__ import annotations

import numpy as np

from ..status import SolveStatus, StatusKind

_PIVOT_TOL = 1e-11


def _pivot(T, basis, row, col):
    T[row] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0.0:
            T[r] -= T[r, col] * T[row]
    basis[row] = col


def _run(T, basis, ncols, max_iter):
    """Maximize the objective held in the last row (stored as reduced costs)."""
    for _ in range(max_iter):
        obj = T[-1, :ncols]
        entering = next((j for j in range(ncols) if obj[j] < -_PIVOT_TOL), None)
        if entering is None:
            return StatusKind.OPTIMAL
        col = T[:-1, entering]
        rows = np.where(col > _PIVOT_TOL)[0]
        if rows.size == 0:
            return StatusKind.UNBOUNDED
        ratios = T[rows, -1] / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
        leave = min(ties, key=lambda r: basis[r])
        _pivot(T, basis, leave, entering)
    return StatusKind.ITER_LIMIT


def solve_lp(objective, ineqs, nonneg=(), max_iter: int = 5000):
    """Maximize ``objective'x`` subject to ``a'x <= b`` for each ``(a, b)``.

    Variables whose index is in ``nonneg`` are constrained to be >= 0; the
    rest are free.  Returns ``(x, value, status)``; ``x`` is ``None`` unless
    the status is optimal.
    """
    c = np.asarray(objective, dtype=float).reshape(-1)
    n = c.size
    nonneg = set(int(i) for i in nonneg)
    free = [i for i in range(n) if i not in nonneg]
    if ineqs:
        A = np.vstack([np.asarray(a, dtype=float).reshape(-1) for a, _ in ineqs])
        b = np.array([float(bb) for _, bb in ineqs])
    else:
        A, b = np.zeros((0, n)), np.zeros(0)
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
        return None, np.nan, SolveStatus(StatusKind.NUMERICAL_FAILURE, "non-finite LP data")

    # x = x_std[:n] - x_std[n:] on free columns
    A_std = np.hstack([A, -A[:, free]])
    c_std = np.concatenate([c, -c[free]])
    nv = A_std.shape[1]
    mrows = A_std.shape[0]

    sign = np.where(b < 0, -1.0, 1.0)
    need_art = np.where(b < 0)[0]
    ncols = nv + mrows + need_art.size
    T = np.zeros((mrows + 1, ncols + 1))
    T[:mrows, :nv] = A_std * sign[:, None]
    T[:mrows, nv:nv + mrows] = np.diag(sign)
    T[:mrows, -1] = b * sign
    basis = [0] * mrows
    for r in range(mrows):
        basis[r] = nv + r
    for k, r in enumerate(need_art):
        T[r, nv + mrows + k] = 1.0
        basis[r] = nv + mrows + k

    if need_art.size:
        # phase 1: maximize -(sum of artificials)
        T[-1, nv + mrows:ncols] = 1.0
        for r in need_art:
            T[-1] -= T[r]
        st = _run(T, basis, ncols, max_iter)
        if st is StatusKind.ITER_LIMIT:
            return None, np.nan, SolveStatus(st, "phase 1 iteration limit")
        if T[-1, -1] < -1e-9 * max(1.0, np.abs(b).max()):
            return None, np.nan, SolveStatus(StatusKind.INFEASIBLE, "phase 1 optimum positive")
        # drive any zero-level artificial out of the basis
        for r in range(mrows):
            if basis[r] >= nv + mrows:
                cand = [j for j in range(nv + mrows) if abs(T[r, j]) > _PIVOT_TOL]
                if cand:
                    _pivot(T, basis, r, cand[0])
        T[:, nv + mrows:ncols] = 0.0
        for r in range(mrows):
            if basis[r] >= nv + mrows:
                T[r, :] = 0.0
                basis[r] = -1

    T[-1, :] = 0.0
    T[-1, :nv] = -c_std
    for r in range(mrows):
        j = basis[r]
        if j >= 0 and T[-1, j] != 0.0:
            T[-1] -= T[-1, j] * T[r]
    st = _run(T, basis, nv + mrows, max_iter)
    if st is not StatusKind.OPTIMAL:
        return None, np.nan, SolveStatus(st)
    x_std = np.zeros(ncols)
    for r in range(mrows):
        if basis[r] >= 0:
            x_std[basis[r]] = T[r, -1]
    x = x_std[:n].copy()
    x[free] -= x_std[n:nv]
    return x, float(c @ x), SolveStatus(StatusKind.OPTIMAL)
