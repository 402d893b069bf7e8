"""Sequential convex optimization for difference-of-convex QCQPs.

Each quadratic ``y'Qy`` is split as ``y'Q+y - y'Q-y``.  Replacing the concave
piece by its tangent plane at ``u`` gives a convex majorant that is tight at
``u``, so the feasible set of the convexified problem sits inside the true
feasible set and its minimizer never increases the true objective.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import QcqpInstance, QuadForm, SpectralSplit, is_feasible, max_violation, spectral_split
from .status import PreconditionError, SolveStatus, SolverFailure, StatusKind
from .subsolvers import solve_convex_qcqp


@dataclass(frozen=True)
class DcInstance:
    base: QcqpInstance
    splits: tuple  # SpectralSplit for the objective, then one per constraint

    def __post_init__(self):
        splits = tuple(self.splits)
        if len(splits) != 1 + self.base.m:
            raise ValueError(f"expected {1 + self.base.m} splits, got {len(splits)}")
        for sp, qf in zip(splits, self.forms):
            if not isinstance(sp, SpectralSplit):
                raise TypeError("splits must be SpectralSplit objects")
            err = np.abs(sp.plus - sp.minus - qf.Q).max(initial=0.0)
            if err > 1e-9 * (1.0 + np.abs(qf.Q).max(initial=0.0)):
                raise ValueError(f"split does not reconstruct its matrix (error {err:.3e})")
        object.__setattr__(self, "splits", splits)

    @classmethod
    def from_instance(cls, inst: QcqpInstance) -> "DcInstance":
        forms = (inst.objective,) + inst.constraints
        return cls(inst, tuple(spectral_split(qf.Q) for qf in forms))

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def forms(self):
        return (self.base.objective,) + self.base.constraints

    @property
    def is_convex(self) -> bool:
        return all(sp.is_convex for sp in self.splits)

    def objective(self, y) -> float:
        return self.base.objective(y)


def _tangent_majorant(qf: QuadForm, sp: SpectralSplit, u) -> QuadForm:
    Mu = sp.minus @ u
    return QuadForm(sp.plus, np.asarray(qf.q) - 2.0 * Mu, qf.c + float(u @ Mu))


def build_upper_relaxation(dc: DcInstance, u) -> QcqpInstance:
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.size != dc.n:
        raise ValueError(f"expansion point has length {u.size}, expected {dc.n}")
    forms = [_tangent_majorant(qf, sp, u) for qf, sp in zip(dc.forms, dc.splits)]
    b = dc.base
    return QcqpInstance(forms[0], tuple(forms[1:]), b.lower, b.upper, b.linear_ineqs)


@dataclass
class ScoTrace:
    iterates: list = field(default_factory=list)  # (y, f(y), step norm)
    status: SolveStatus = SolveStatus(StatusKind.ITER_LIMIT)

    @property
    def values(self) -> np.ndarray:
        return np.array([v for _, v, _ in self.iterates])

    @property
    def steps(self) -> int:
        return max(0, len(self.iterates) - 1)


def run_sco(dc: DcInstance, y0, eps: float = 1e-6, max_iter: int = 500,
            feas_tol: float = 1e-9, inner_tol: float | None = None):
    """Iterate convex majorant solves from a feasible ``y0``.

    Returns ``(y, value, trace)``.  The loop solves first and then tests the
    step length, so at least one convex solve always happens.  An inner
    solution is only accepted when its majorant value does not exceed the
    majorant value at the expansion point; otherwise the expansion point is
    already optimal to solver precision and the loop stops there.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    u = np.asarray(y0, dtype=float).reshape(-1).copy()
    if u.size != dc.n:
        raise ValueError(f"starting point has length {u.size}, expected {dc.n}")
    if not is_feasible(dc.base, u, feas_tol):
        raise PreconditionError(
            f"starting point is infeasible (max violation {max_violation(dc.base, u):.3e})")
    tol = inner_tol if inner_tol is not None else min(1e-8, eps / 10)
    trace = ScoTrace()
    trace.iterates.append((u.copy(), dc.objective(u), 0.0))
    for _ in range(max_iter):
        relax = build_upper_relaxation(dc, u)
        res = solve_convex_qcqp(relax, tol=tol, y_start=u, feas_tol=feas_tol, check_psd=False)
        if res.y is None:
            trace.status = SolveStatus(res.status.kind, f"inner solve failed: {res.status.message}")
            raise SolverFailure(trace.status, partial=trace)
        y = res.y
        if relax.objective(y) > relax.objective(u) or not is_feasible(dc.base, y, feas_tol):
            y = u.copy()
        step = float(np.linalg.norm(y - u))
        trace.iterates.append((y.copy(), dc.objective(y), step))
        u = y
        if step < eps:
            trace.status = SolveStatus(StatusKind.OPTIMAL, "step below tolerance")
            break
    else:
        trace.status = SolveStatus(StatusKind.ITER_LIMIT, f"no convergence in {max_iter} iterations")
    return u, dc.objective(u), trace


def find_feasible_point(dc: DcInstance, start=None, max_iter: int = 100, feas_tol: float = 1e-9):
    """Drive the largest constraint residual below zero by convexified phase-1 steps.

    Solves ``min s`` subject to each tangent majorant ``<= s`` over the box and
    linear rows, re-expanding at the new point, until ``s <= 0``.  Returns the
    point, or raises ``SolverFailure`` with an Infeasible status if the
    residual stalls above zero.
    """
    b = dc.base
    n = dc.n
    lo, up = np.array(b.lower), np.array(b.upper)
    if start is None:
        start = np.where(np.isfinite(lo) & np.isfinite(up), 0.5 * (lo + up),
                         np.where(np.isfinite(lo), lo, np.where(np.isfinite(up), up, 0.0)))
    u = np.clip(np.asarray(start, dtype=float).reshape(-1), lo, up)
    if is_feasible(b, u, 0.0):
        return u
    pad = lambda M: np.pad(M, ((0, 1), (0, 1)))
    obj = QuadForm(np.zeros((n + 1, n + 1)), np.r_[np.zeros(n), 1.0])
    lin = tuple((np.r_[a, 0.0], bb) for a, bb in b.linear_ineqs)
    last = np.inf
    for _ in range(max_iter):
        cons = []
        for qf, sp in zip(b.constraints, dc.splits[1:]):
            t = _tangent_majorant(qf, sp, u)
            cons.append(QuadForm(pad(t.Q), np.r_[t.q, -1.0], t.c))
        inst = QcqpInstance(obj, tuple(cons), np.r_[lo, -np.inf], np.r_[up, np.inf], lin)
        s0 = max(0.0, max((g(u) for g in b.constraints), default=0.0)) + 1.0
        res = solve_convex_qcqp(inst, tol=1e-10, y_start=np.r_[u, s0], feas_tol=feas_tol, check_psd=False)
        if res.y is None:
            raise SolverFailure(SolveStatus(StatusKind.INFEASIBLE, f"phase 1: {res.status}"), partial=u)
        u = res.y[:n]
        if is_feasible(b, u, feas_tol):
            return u
        s = res.y[n]
        if s > 0 and last - s <= 1e-12 * (1 + abs(s)):
            raise SolverFailure(SolveStatus(StatusKind.INFEASIBLE,
                                            f"phase 1 residual stalled at {s:.3e}"), partial=u)
        last = s
    raise SolverFailure(SolveStatus(StatusKind.ITER_LIMIT, "phase 1 iteration limit"), partial=u)
