"""Best-first branch and bound: SCO for incumbents, convex underestimators for bounds.

Bounds come from :func:`build_lower_relaxation_mccormick`.  Nodes are kept in
a min-heap keyed on ``(lower bound, node id)``, so ties resolve in creation
order and single-worker runs are reproducible.  Termination is relative:
the search stops once the best open bound reaches ``v* - eps*max(1, |v*|)``.

Incumbent acceptance keeps a deliberate asymmetry: the first quadratic
constraint must hold with no tolerance while the others may exceed zero by
``eps``.  Node solves are side-effect free, so with ``threads > 1`` both
children of a node are bounded concurrently.
"""

from __future__ import annotations

import heapq
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import QcqpInstance, is_feasible
from .liquidation import ActivityReport, LiquidationParams, check_optimality_activity
from .lowerbound import build_lower_relaxation_mccormick
from .sco import DcInstance, find_feasible_point, run_sco
from .status import PreconditionError, SolveStatus, SolverFailure, StatusKind
from .subsolvers import solve_convex_qcqp

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BbNode:
    box: tuple
    lower: float
    relax_argmin: np.ndarray
    depth: int
    id: int

    def __lt__(self, other):
        return (self.lower, self.id) < (other.lower, other.id)


@dataclass(frozen=True)
class BbLimits:
    max_nodes: int = 100_000
    time_limit: float | None = None


@dataclass
class SolveReport:
    incumbent: np.ndarray | None
    upper: float
    lower: float
    gap: float
    nodes_processed: int
    sco_restarts: int
    status: SolveStatus
    wall_time: float
    activity: ActivityReport | None = None
    abs_gap: float = math.nan
    sco_iterations: int = 0
    history: list = field(default_factory=list)  # (nodes, v*, lower) after each node


def branch(node: BbNode, next_id: int = 0):
    """Bisect the longest edge; returns two children with ``lower`` inherited."""
    lo, up = (np.asarray(b, dtype=float) for b in node.box)
    width = up - lo
    i = int(np.argmax(width))
    if not width[i] > 0:
        raise ValueError("cannot branch a zero-width box")
    beta = 0.5 * (lo[i] + up[i])
    up_left, lo_right = up.copy(), lo.copy()
    up_left[i] = beta
    lo_right[i] = beta
    left = BbNode((lo, up_left), node.lower, node.relax_argmin, node.depth + 1, next_id)
    right = BbNode((lo_right, up), node.lower, node.relax_argmin, node.depth + 1, next_id + 1)
    return left, right


def worst_case_nodes(dc: DcInstance, box, eps: float, include_objective: bool = True) -> int:
    """Product over coordinates of ``max(1, ceil(norm * width / (2*sqrt(eps))))``.

    ``norm`` is the largest minus-part spectral norm among the constraints,
    and also the objective when ``include_objective`` is set.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    lo, up = (np.asarray(b, dtype=float) for b in box)
    splits = dc.splits if include_objective else dc.splits[1:]
    norm = max((sp.norm_minus for sp in splits), default=0.0)
    total = 1
    for w in up - lo:
        total *= max(1, math.ceil(norm * w / (2 * math.sqrt(eps))))
    return total


def _within(dc: DcInstance, y, eps: float) -> bool:
    """First quadratic constraint at tolerance 0, the rest at ``eps``, domain at 1e-9."""
    cons = dc.base.constraints
    if cons and cons[0](y) > 0:
        return False
    if any(g(y) > eps for g in cons[1:]):
        return False
    b = dc.base
    return is_feasible(QcqpInstance(b.objective, (), b.lower, b.upper, b.linear_ineqs), y, 1e-9)


def _bound(dc: DcInstance, box, tol):
    relax = build_lower_relaxation_mccormick(dc, box)
    return solve_convex_qcqp(relax.instance, tol=tol, check_psd=False)


def run_scobb(dc: DcInstance, liq: LiquidationParams | None = None, eps: float = 1e-6,
              limits: BbLimits | None = None, y0=None, threads: int = 1, callback=None,
              restart_every_improving: bool = False, sco_eps: float = 1e-6) -> SolveReport:
    if eps <= 0:
        raise ValueError("eps must be positive")
    limits = limits or BbLimits()
    t_start = time.perf_counter()
    lo, up = np.array(dc.base.lower), np.array(dc.base.upper)
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(up))):
        raise PreconditionError("branch and bound needs a bounded box")
    bound_tol = min(1e-8, eps / 10)

    def finish(y, v, lower, nodes, restarts, status, sco_its, history):
        scale = max(1.0, abs(v)) if np.isfinite(v) else 1.0
        ag = max(0.0, v - lower) if np.isfinite(v) and np.isfinite(lower) else math.inf
        act = check_optimality_activity(liq, y) if (liq is not None and y is not None) else None
        return SolveReport(y, v, lower, ag / scale, nodes, restarts, status,
                           time.perf_counter() - t_start, act, ag, sco_its, history)

    # starting point
    if y0 is None:
        if liq is not None:
            from .cutplane import run_cutplane
            y0 = run_cutplane(liq).feasible_point
        else:
            try:
                y0 = find_feasible_point(dc)
            except SolverFailure as exc:
                return finish(None, math.inf, math.inf, 0, 0, exc.status, 0, [])

    y_best, v_best, tr = run_sco(dc, y0, eps=sco_eps)
    sco_its = tr.steps
    restarts = 0

    def tol_abs(v):
        return eps * max(1.0, abs(v))

    res = _bound(dc, (lo, up), bound_tol)
    nodes = 1
    if res.y is None:
        st = res.status if res.status.kind is not StatusKind.INFEASIBLE else \
            SolveStatus(StatusKind.INFEASIBLE, "root relaxation infeasible")
        return finish(y_best, v_best, math.inf, nodes, restarts, st, sco_its, [])
    if _within(dc, res.y, eps) and dc.objective(res.y) < v_best:
        y_best, v_best = res.y, dc.objective(res.y)

    heap = []
    next_id = 1
    root = BbNode((lo, up), res.lower_bound, res.y, 0, 0)
    # smallest bound among nodes discarded by the cutoff; part of the certificate
    pruned_lower = math.inf
    if root.lower < v_best - tol_abs(v_best):
        heap.append(root)
    else:
        pruned_lower = root.lower
    history = [(nodes, v_best, root.lower)]
    if callback:
        callback(nodes, v_best, root.lower, len(heap))

    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    status = SolveStatus(StatusKind.OPTIMAL, "root bound within tolerance")
    lower_final = root.lower
    try:
        while heap:
            node = heapq.heappop(heap)
            if node.lower >= v_best - tol_abs(v_best):
                lower_final = node.lower
                status = SolveStatus(StatusKind.OPTIMAL)
                break
            if nodes >= limits.max_nodes:
                heapq.heappush(heap, node)
                status = SolveStatus(StatusKind.ITER_LIMIT, f"node limit {limits.max_nodes} reached")
                break
            if limits.time_limit is not None and time.perf_counter() - t_start > limits.time_limit:
                heapq.heappush(heap, node)
                status = SolveStatus(StatusKind.ITER_LIMIT, f"time limit {limits.time_limit}s reached")
                break
            if not np.any(node.box[1] > node.box[0]):
                # a point box: its relaxation is exact, nothing left to split
                continue
            kids = branch(node, next_id)
            next_id += 2
            if pool is not None:
                results = list(pool.map(lambda k: _bound(dc, k.box, bound_tol), kids))
            else:
                results = [_bound(dc, k.box, bound_tol) for k in kids]
            nodes += 2
            solved, unsolved = [], []
            for kid, r in zip(kids, results):
                if r.y is None:
                    if r.status.kind is not StatusKind.INFEASIBLE:
                        # keep the box open under the parent's bound
                        log.debug("node %d relaxation failed: %s", kid.id, r.status)
                        unsolved.append(kid)
                    continue
                # a child bound can never be weaker than its parent's
                solved.append(BbNode(kid.box, max(node.lower, r.lower_bound), r.y, kid.depth, kid.id))
            if solved:
                hat = min(solved, key=lambda k: dc.objective(k.relax_argmin)).relax_argmin
                f_hat = dc.objective(hat)
                improving = f_hat <= v_best - tol_abs(v_best) or (restart_every_improving and f_hat < v_best)
                if improving and _within(dc, hat, eps):
                    cand = (f_hat, hat)
                    # SCO needs a truly feasible start; an eps-feasible point is kept as is
                    if is_feasible(dc.base, hat, 1e-9):
                        y_bar, v_bar, tr = run_sco(dc, hat, eps=sco_eps)
                        restarts += 1
                        sco_its += tr.steps
                        if v_bar < f_hat:
                            cand = (v_bar, y_bar)
                    if cand[0] < v_best:
                        v_best, y_best = cand
            cutoff = v_best - tol_abs(v_best)
            for kid in solved + unsolved:
                if kid.lower < cutoff:
                    heapq.heappush(heap, kid)
                else:
                    pruned_lower = min(pruned_lower, kid.lower)
            pruned_lower = min([pruned_lower] + [k.lower for k in heap if k.lower >= cutoff])
            heap = [k for k in heap if k.lower < cutoff]
            heapq.heapify(heap)
            open_lower = min(heap[0].lower if heap else math.inf, pruned_lower, v_best)
            history.append((nodes, v_best, open_lower))
            if callback:
                callback(nodes, v_best, open_lower, len(heap))
        else:
            if history[-1][0] > 1:
                status = SolveStatus(StatusKind.OPTIMAL, "node pool exhausted")
            lower_final = math.inf
        if heap and status.kind is StatusKind.ITER_LIMIT:
            lower_final = heap[0].lower
        lower_final = min(lower_final, pruned_lower, v_best)
    finally:
        if pool is not None:
            pool.shutdown()
    return finish(y_best, v_best, lower_final, nodes, restarts, status, sco_its, history)
