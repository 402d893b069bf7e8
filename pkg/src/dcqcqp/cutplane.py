"""Cutting-plane maximization of the Lagrangian dual of the liquidation QCQP.

Only the two leverage constraints are dualized.  The remaining domain is a
product of per-asset triangles, so every Lagrangian evaluation splits into
``m`` closed-form 2-D problems.  Points generated along the way that happen
to satisfy both leverage constraints are kept as starting points for SCO.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import is_feasible, max_violation
from .liquidation import LiquidationParams, _assemble, first_cap_bracket, start_point
from .status import PreconditionError, SolveStatus, StatusKind
from .subsolvers import Triangle2dProblem, solve_lp, triangle2d_min


@dataclass(frozen=True)
class Cut:
    fval: float
    gval: float
    hval: float
    y: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite([self.fval, self.gval, self.hval])):
            raise ValueError("cut values must be finite")

    def at(self, t1, t2) -> float:
        return self.fval + t1 * self.gval + t2 * self.hval


@dataclass(frozen=True)
class CutPlaneResult:
    t1: float
    t2: float
    dual_value: float
    feasible_point: np.ndarray | None
    iterations: int
    trace: tuple = field(default=())  # (z_k, theta_k)
    status: SolveStatus = SolveStatus(StatusKind.OPTIMAL)


def lagrangian_min(p: LiquidationParams, t1: float, t2: float):
    """``min f + t1*g + t2*h`` over the trade domain; returns ``(theta, y)``."""
    if t1 < 0 or t2 < 0:
        raise ValueError(f"multipliers must be nonnegative, got ({t1}, {t2})")
    inst = _assemble(p)
    f, g, h = inst.objective, inst.constraints[0], inst.constraints[1]
    Q = f.Q + t1 * g.Q + t2 * h.Q
    q = f.q + t1 * g.q + t2 * h.q
    m = p.m
    y = np.zeros(2 * m)
    theta = f.c + t1 * g.c + t2 * h.c
    for i in range(m):
        idx = [i, m + i]
        prob = Triangle2dProblem(Q[np.ix_(idx, idx)], -q[idx], p.x0[i])
        yi, vi = triangle2d_min(prob)
        y[idx] = yi
        theta += vi
    return float(theta), y


def restricted_dual(cuts, bound: float = 1e6):
    """Best ``(z, t1, t2)`` with ``z`` below every cut and ``0 <= t <= bound``."""
    if not cuts:
        raise ValueError("at least one cut is required")
    rows = [(np.array([1.0, -c.gval, -c.hval]), c.fval) for c in cuts]
    rows += [(np.array([0.0, 1.0, 0.0]), bound), (np.array([0.0, 0.0, 1.0]), bound)]
    x, z, st = solve_lp(np.array([1.0, 0.0, 0.0]), rows, nonneg=(1, 2))
    if not st.ok:
        return np.nan, np.nan, np.nan, SolveStatus(StatusKind.NUMERICAL_FAILURE,
                                                   f"restricted dual LP: {st}")
    return float(z), float(x[1]), float(x[2]), st


def run_cutplane(p: LiquidationParams, tol: float = 1e-6, max_iter: int = 200,
                 bound: float = 1e6) -> CutPlaneResult:
    p.validate()
    holds, s0, sh = first_cap_bracket(p)
    if not holds:
        raise PreconditionError(f"first leverage slack is {s0:.6g} at y1=0 and {sh:.6g} at y1=-x0/2")
    inst = _assemble(p)
    f, g, h = inst.objective, inst.constraints[0], inst.constraints[1]
    y0 = start_point(p)
    if not is_feasible(inst, y0):
        raise PreconditionError(f"equal-halves start is infeasible (violation {max_violation(inst, y0):.3e})")

    def cut(y):
        return Cut(f(y), g(y), h(y), y)

    cuts = [cut(y0)]
    best_y, best_f = y0, f(y0)
    trace = []
    t1 = t2 = theta = np.nan
    status = SolveStatus(StatusKind.ITER_LIMIT, f"no convergence in {max_iter} iterations")
    for _ in range(max_iter):
        z, t1, t2, st = restricted_dual(cuts, bound)
        if not st.ok:
            status = st
            break
        theta, y = lagrangian_min(p, t1, t2)
        trace.append((z, theta))
        if g(y) <= 0 and h(y) <= 0 and is_feasible(inst, y) and f(y) < best_f:
            best_y, best_f = y, f(y)
        if z <= theta + tol * (1 + abs(z)):
            status = SolveStatus(StatusKind.OPTIMAL)
            break
        cuts.append(cut(y))
    return CutPlaneResult(float(t1), float(t2), float(theta), best_y, len(trace), tuple(trace), status)
