"""Exhaustive grid search over a small box, used to cross-check the solvers.

Grid points are accepted when every constraint is within half a grid cell
times its Lipschitz constant on the box, so a coarse grid cannot miss a thin
feasible region.  An optional local polish (SLSQP from the best grid points)
sharpens the answer; polished points are only accepted when exactly
feasible at 1e-9.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .core import QcqpInstance, is_feasible, residuals
from .status import PreconditionError, SolveStatus, SolverFailure, StatusKind

MAX_DIM = 4


@dataclass(frozen=True)
class OracleResult:
    y: np.ndarray
    value: float
    grid_value: float
    step: np.ndarray           # grid spacing per coordinate
    error_bound: float         # objective Lipschitz constant times half the cell diagonal
    exactly_feasible: bool
    polished: bool
    points: int

    def __iter__(self):
        yield self.y
        yield self.value


def _lipschitz(Q, q, lo, up):
    """Upper bound on ``||2Qy + q||`` over the box."""
    center, half = 0.5 * (lo + up), 0.5 * (up - lo)
    g = 2 * Q @ center + q
    return float(np.linalg.norm(np.abs(g) + 2 * np.abs(Q) @ half))


def _eval_rows(forms, A, b, Y):
    vals = [np.einsum("ki,ij,kj->k", Y, f.Q, Y) + Y @ f.q + f.c for f in forms]
    lin = Y @ A.T - b if A.size else np.zeros((Y.shape[0], 0))
    return vals, lin


def brute_force_oracle(inst: QcqpInstance, resolution: float = 1e-3, max_points: int = 20_000_000,
                       polish: bool = True, keep: int = 20) -> OracleResult:
    """Minimize over a grid with ``ceil(1/resolution)`` cells per box edge.

    ``resolution`` is relative to each edge length.  When the full grid would
    exceed ``max_points`` the cell count per edge is reduced evenly; the
    spacing actually used is reported in the result.
    """
    n = inst.n
    if n > MAX_DIM:
        raise PreconditionError(f"grid oracle supports at most {MAX_DIM} variables, got {n}")
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    lo, up = np.array(inst.lower), np.array(inst.upper)
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(up))):
        raise PreconditionError("grid oracle needs a bounded box")
    cells = max(1, math.ceil(1.0 / resolution))
    cells = min(cells, max(1, int(max_points ** (1.0 / n)) - 1))
    axes = [np.linspace(lo[i], up[i], cells + 1) if up[i] > lo[i] else np.array([lo[i]]) for i in range(n)]
    step = np.array([(up[i] - lo[i]) / cells for i in range(n)])
    half_diag = 0.5 * float(np.linalg.norm(step))
    tol_q = np.array([_lipschitz(np.asarray(g.Q), np.asarray(g.q), lo, up) * half_diag
                      for g in inst.constraints])
    A, b = inst.linear_matrix()
    tol_l = np.linalg.norm(A, axis=1) * half_diag if A.size else np.zeros(0)
    forms = (inst.objective,) + inst.constraints

    best_vals = np.full(0, np.inf)
    best_pts = np.zeros((0, n))
    exact_val, exact_y = np.inf, None
    count = 0
    # chunk over the first axis, vectorize over the rest
    rest = np.stack(np.meshgrid(*axes[1:], indexing="ij"), -1).reshape(-1, n - 1) if n > 1 else np.zeros((1, 0))
    for x in axes[0]:
        Y = np.hstack([np.full((rest.shape[0], 1), x), rest])
        count += Y.shape[0]
        vals, lin = _eval_rows(forms, A, b, Y)
        f = vals[0]
        ok = np.ones(Y.shape[0], dtype=bool)
        exact = np.ones(Y.shape[0], dtype=bool)
        for j, g in enumerate(vals[1:]):
            ok &= g <= tol_q[j]
            exact &= g <= 1e-9
        for k in range(lin.shape[1]):
            ok &= lin[:, k] <= tol_l[k]
            exact &= lin[:, k] <= 1e-9
        if np.any(exact):
            i = np.argmin(np.where(exact, f, np.inf))
            if f[i] < exact_val:
                exact_val, exact_y = float(f[i]), Y[i].copy()
        if np.any(ok):
            idx = np.where(ok)[0]
            take = idx[np.argsort(f[idx])[:keep]]
            best_vals = np.concatenate([best_vals, f[take]])
            best_pts = np.vstack([best_pts, Y[take]])
            order = np.argsort(best_vals)[:keep]
            best_vals, best_pts = best_vals[order], best_pts[order]
    if best_vals.size == 0:
        raise SolverFailure(SolveStatus(StatusKind.INFEASIBLE, "no grid point passes the feasibility filter"))

    err = _lipschitz(np.asarray(inst.objective.Q), np.asarray(inst.objective.q), lo, up) * half_diag
    y, val, feasible, polished = best_pts[0], float(best_vals[0]), False, False
    if exact_y is not None:
        y, val, feasible = exact_y, exact_val, True
    if polish:
        for start in best_pts:
            z = _polish(inst, start)
            if z is not None and inst.objective(z) < (val if feasible else np.inf):
                y, val, feasible, polished = z, inst.objective(z), True, True
    return OracleResult(np.asarray(y), float(val), float(best_vals[0]), step, err, feasible, polished, count)


def _polish(inst: QcqpInstance, start):
    from scipy.optimize import minimize

    f = inst.objective
    cons = []
    for g in inst.constraints:
        cons.append({"type": "ineq", "fun": (lambda y, g=g: -g(y)), "jac": (lambda y, g=g: -g.gradient(y))})
    for a, bb in inst.linear_ineqs:
        cons.append({"type": "ineq", "fun": (lambda y, a=a, bb=bb: bb - a @ y), "jac": (lambda y, a=a: -a)})
    bounds = list(zip(inst.lower, inst.upper))
    try:
        res = minimize(f, start, jac=f.gradient, bounds=bounds, constraints=cons, method="SLSQP",
                       options={"ftol": 1e-14, "maxiter": 500})
    except (ValueError, ArithmeticError):
        return None
    z = np.clip(res.x, inst.lower, inst.upper)
    return z if is_feasible(inst, z, 1e-9) else None
