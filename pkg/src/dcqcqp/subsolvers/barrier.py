"""Log-barrier interior-point solver for convex QCQPs.

Damped Newton centering with a step capped at the exact distance to the
boundary of every constraint (roots of the quadratic along the search
direction), then backtracking.  Phase 1 minimizes the maximum residual.
Fixed coordinates (``lower == upper``) are eliminated before solving.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls

from ..core import QcqpInstance
from ..status import SolveStatus, StatusKind


@dataclass
class ConvexResult:
    y: np.ndarray
    value: float
    status: SolveStatus
    lower_bound: float = -np.inf
    kkt_residual: float = np.inf
    newton_steps: int = 0
    relaxed_by: float = 0.0

    def __iter__(self):
        return iter((self.y, self.value, self.status))


class _Problem:
    """Objective ``t*(y'P y + p'y + r0)`` plus barrier over quadratic and linear rows."""

    def __init__(self, P, p, r0, Qs, qs, cs, G, h):
        self.P, self.p, self.r0 = P, p, r0
        self.Qs, self.qs, self.cs = Qs, qs, cs
        self.G, self.h = G, h
        self.ncon = len(cs) + len(h)

    def f(self, y):
        return float(y @ self.P @ y + self.p @ y + self.r0)

    def cons(self, y):
        gq = np.einsum("i,kij,j->k", y, self.Qs, y) + self.qs @ y + self.cs if len(self.cs) else np.zeros(0)
        gl = self.G @ y - self.h
        return gq, gl

    def max_res(self, y):
        gq, gl = self.cons(y)
        r = np.concatenate([gq, gl])
        return float(r.max()) if r.size else -np.inf

    def phi(self, y, t):
        gq, gl = self.cons(y)
        if np.any(gq >= 0) or np.any(gl >= 0):
            return np.inf
        return t * self.f(y) - np.sum(np.log(-gq)) - np.sum(np.log(-gl))

    def newton(self, y, t):
        gq, gl = self.cons(y)
        grad = t * (2 * self.P @ y + self.p)
        H = 2 * t * self.P
        if len(gq):
            dg = 2 * np.einsum("kij,j->ki", self.Qs, y) + self.qs
            inv = 1.0 / (-gq)
            grad = grad + dg.T @ inv
            H = H + (dg.T * inv**2) @ dg + 2 * np.einsum("k,kij->ij", inv, self.Qs)
        if len(gl):
            inv = 1.0 / (-gl)
            grad = grad + self.G.T @ inv
            H = H + (self.G.T * inv**2) @ self.G
        H = 0.5 * (H + H.T)
        try:
            L = np.linalg.cholesky(H)
            dy = -np.linalg.solve(L.T, np.linalg.solve(L, grad))
        except np.linalg.LinAlgError:
            reg = 1e-12 * max(1.0, np.abs(np.diag(H)).max())
            dy = -np.linalg.lstsq(H + reg * np.eye(len(y)), grad, rcond=None)[0]
        return dy, grad, gq, gl

    def max_step(self, y, dy, gq, gl):
        amax = np.inf
        if len(gl):
            gd = self.G @ dy
            pos = gd > 0
            if np.any(pos):
                amax = min(amax, float(np.min(-gl[pos] / gd[pos])))
        for k in range(len(gq)):
            a = float(dy @ self.Qs[k] @ dy)
            b = float((2 * self.Qs[k] @ y + self.qs[k]) @ dy)
            c = float(gq[k])
            # smallest positive root of a s^2 + b s + c = 0 with c < 0
            if a > 1e-300:
                disc = b * b - 4 * a * c
                root = (2 * -c) / (b + np.sqrt(disc)) if b >= 0 else (-b + np.sqrt(disc)) / (2 * a)
                amax = min(amax, root)
            elif b > 0:
                amax = min(amax, -c / b)
        return amax


def _center(prob: _Problem, y, t, max_newton, stop=None):
    steps = 0
    dec = np.inf
    stalls = 0
    for _ in range(max_newton):
        dy, grad, gq, gl = prob.newton(y, t)
        prev, dec = dec, float(-grad @ dy)
        if dec / 2 <= 1e-14:
            break
        # roundoff floor: decrement no longer shrinking quadratically
        if dec < 1e-7 and dec > 0.25 * prev:
            stalls += 1
            if stalls >= 2:
                break
        amax = prob.max_step(y, dy, gq, gl)
        alpha = min(1.0, 0.99 * amax)
        if dec > 0.25 or alpha < 1.0:
            phi0 = prob.phi(y, t)
            while alpha > 1e-14:
                val = prob.phi(y + alpha * dy, t)
                if val <= phi0 - 0.25 * alpha * dec or (not np.isfinite(phi0) and np.isfinite(val)):
                    break
                alpha *= 0.5
            else:
                break
        y_new = y + alpha * dy
        # roundoff can land exactly on a boundary near degenerate feasible sets
        while prob.max_res(y_new) >= 0 and alpha > 1e-14:
            alpha *= 0.5
            y_new = y + alpha * dy
        if prob.max_res(y_new) >= 0:
            break
        steps += 1
        if np.array_equal(y_new, y):
            break
        y = y_new
        if stop is not None and stop(y):
            break
    return y, steps, dec


def _barrier(prob: _Problem, y, tol, max_iter, mu=12.0, max_newton=80, stop=None):
    """Returns ``(y, t, newton_steps, outer_iters, stopped_early)``."""
    f0 = prob.f(y)
    t = max(1.0, prob.ncon) / max(1.0, abs(f0))
    steps = 0
    for it in range(max_iter):
        y, k, _ = _center(prob, y, t, max_newton, stop)
        steps += k
        if stop is not None and stop(y):
            return y, t, steps, it + 1, True
        if prob.ncon / t <= tol * (1.0 + abs(prob.f(y))):
            return y, t, steps, it + 1, False
        t *= mu
    return y, t, steps, max_iter, None


def _kkt_residual(prob: _Problem, y):
    """``min_{lam>=0} ||grad f + J'lam|| + ||lam * g||`` over all rows."""
    gq, gl = prob.cons(y)
    gradf = 2 * prob.P @ y + prob.p
    J = []
    if len(gq):
        J.append(2 * np.einsum("kij,j->ki", prob.Qs, y) + prob.qs)
    if len(gl):
        J.append(prob.G)
    if not J:
        return float(np.linalg.norm(gradf)), gradf
    J = np.vstack(J)
    g = np.concatenate([gq, gl])
    # only rows within reach of activity can carry multipliers
    near = g > -1e-6 * (1.0 + np.abs(g).max())
    if not np.any(near):
        return float(np.linalg.norm(gradf)), gradf
    Jn, gn = J[near], g[near]
    M = np.vstack([Jn.T, np.diag(np.abs(gn))])
    rhs = np.concatenate([-gradf, np.zeros(gn.size)])
    lam, res = nnls(M, rhs, maxiter=50 * M.shape[1])
    return float(res), gradf


def _psd(Q, tol=1e-8):
    if not np.any(Q):
        return True
    scale = max(1.0, float(np.abs(Q).max()))
    try:
        np.linalg.cholesky(Q + tol * scale * np.eye(Q.shape[0]))
        return True
    except np.linalg.LinAlgError:
        return False


def solve_convex_qcqp(inst: QcqpInstance, tol: float = 1e-8, max_iter: int = 60,
                      y_start=None, feas_tol: float = 1e-9, check_psd: bool = True) -> ConvexResult:
    """Minimize a convex QCQP; unpacks as ``(y, value, status)``.

    ``lower_bound`` is the barrier duality bound ``f(y) - (#constraints)/t``.
    """
    n = inst.n
    forms = (inst.objective,) + inst.constraints
    if check_psd:
        for j, qf in enumerate(forms):
            if not _psd(qf.Q):
                what = "objective" if j == 0 else f"constraint {j - 1}"
                return ConvexResult(None, np.nan, SolveStatus(StatusKind.NUMERICAL_FAILURE,
                                                              f"{what} matrix is not PSD"))

    lo, up = np.array(inst.lower), np.array(inst.upper)
    width = up - lo
    fixed = np.isfinite(width) & (width <= 1e-12 * np.maximum(1.0, np.abs(lo) + np.abs(up)))
    free = np.where(~fixed)[0]
    v = np.zeros(lo.size)
    v[fixed] = 0.5 * (lo[fixed] + up[fixed])

    def reduce(qf):
        Q, q = np.asarray(qf.Q), np.asarray(qf.q)
        Qff = Q[np.ix_(free, free)]
        qf_ = q[free] + 2 * Q[np.ix_(free, np.where(fixed)[0])] @ v[fixed]
        c = qf.c + v[fixed] @ Q[np.ix_(fixed, fixed)] @ v[fixed] + q[fixed] @ v[fixed]
        return Qff, qf_, c

    P, p, r0 = reduce(inst.objective)
    Qs, qs, cs = [], [], []
    Grows, hrows = [], []
    for j, g in enumerate(inst.constraints):
        Q, q, c = reduce(g)
        if np.any(Q):
            Qs.append(Q); qs.append(q); cs.append(c)
        elif np.any(q):
            Grows.append(q); hrows.append(-c)
        elif c > feas_tol:
            return ConvexResult(None, np.nan, SolveStatus(StatusKind.INFEASIBLE,
                                                          f"constraint {j} is constant {c:.3e} > 0"))
    A, b = inst.linear_matrix()
    for a, bb in zip(A, b):
        af = a[free]
        rhs = bb - a[fixed] @ v[fixed]
        if np.any(af):
            Grows.append(af); hrows.append(rhs)
        elif rhs < -feas_tol:
            return ConvexResult(None, np.nan, SolveStatus(StatusKind.INFEASIBLE,
                                                          "constant linear row violated"))
    nf = free.size
    for i, k in enumerate(free):
        if np.isfinite(up[k]):
            e = np.zeros(nf); e[i] = 1.0
            Grows.append(e); hrows.append(up[k])
        if np.isfinite(lo[k]):
            e = np.zeros(nf); e[i] = -1.0
            Grows.append(e); hrows.append(-lo[k])
    Qs = np.array(Qs).reshape(-1, nf, nf)
    qs = np.array(qs).reshape(-1, nf)
    cs = np.array(cs, dtype=float)
    G = np.array(Grows).reshape(-1, nf)
    h = np.array(hrows, dtype=float)

    def full(yf):
        y = v.copy()
        y[free] = yf
        return y

    if nf == 0:
        y = full(np.zeros(0))
        val = inst.objective(y)
        return ConvexResult(y, val, SolveStatus(StatusKind.OPTIMAL, "all variables fixed"), val, 0.0)

    prob = _Problem(P, p, r0, Qs, qs, cs, G, h)

    if y_start is not None:
        y0 = np.asarray(y_start, dtype=float)[free].copy()
    else:
        flo, fup = lo[free], up[free]
        y0 = np.where(np.isfinite(flo) & np.isfinite(fup), 0.5 * (flo + fup),
                      np.where(np.isfinite(flo), flo + 1.0, np.where(np.isfinite(fup), fup - 1.0, 0.0)))
    scale = 1.0 + np.abs(y0).max()
    steps = 0
    relaxed = 0.0

    if prob.ncon and prob.max_res(y0) >= 0:
        y0, s_star, k, status = _phase1(prob, y0, feas_tol, max_iter)
        steps += k
        if status is not None:
            return ConvexResult(None, np.nan, status, newton_steps=steps)
        if s_star >= 0:
            relaxed = s_star + feas_tol
            prob = _Problem(P, p, r0, Qs, qs, cs - relaxed, G, h + relaxed)

    if prob.ncon == 0:
        # unconstrained convex quadratic
        try:
            yf = np.linalg.solve(2 * P, -p)
        except np.linalg.LinAlgError:
            yf = np.linalg.lstsq(2 * P, -p, rcond=None)[0]
        if np.linalg.norm(2 * P @ yf + p) > 1e-9 * (1 + np.linalg.norm(p)):
            return ConvexResult(None, -np.inf, SolveStatus(StatusKind.UNBOUNDED, "objective unbounded below"))
        y = full(yf)
        val = inst.objective(y)
        return ConvexResult(y, val, SolveStatus(StatusKind.OPTIMAL), val, 0.0, steps)

    yf, t, k, outer, flag = _barrier(prob, y0, tol, max_iter)
    steps += k
    y = full(yf)
    val = inst.objective(y)
    kkt, gradf = _kkt_residual(prob, yf)
    lower = val - prob.ncon / t
    if flag is None:
        st = SolveStatus(StatusKind.ITER_LIMIT, f"barrier stopped after {max_iter} outer steps")
    elif kkt > max(tol, 1e-7) * (1.0 + np.linalg.norm(gradf)) * scale:
        st = SolveStatus(StatusKind.NUMERICAL_FAILURE, f"KKT residual {kkt:.3e} after centering")
    else:
        st = SolveStatus(StatusKind.OPTIMAL)
    return ConvexResult(y, val, st, lower, kkt, steps, relaxed)


def _phase1(prob: _Problem, y0, feas_tol, max_iter):
    """Minimize ``s`` subject to every row ``<= s``; returns ``(y, s*, steps, fail_status)``."""
    nf = y0.size
    s0 = prob.max_res(y0)
    bound = 1.0 + abs(s0)
    # variables (y, s); rows g_j(y) - s <= 0, G y - h - s <= 0, -s - bound <= 0
    k = len(prob.cs)
    Qs = np.zeros((k, nf + 1, nf + 1))
    Qs[:, :nf, :nf] = prob.Qs
    qs = np.hstack([prob.qs, -np.ones((k, 1))]) if k else np.zeros((0, nf + 1))
    G = np.hstack([prob.G, -np.ones((len(prob.h), 1))])
    G = np.vstack([G, np.r_[np.zeros(nf), -1.0]])
    h = np.r_[prob.h, bound]
    P = np.zeros((nf + 1, nf + 1))
    p = np.r_[np.zeros(nf), 1.0]
    ph = _Problem(P, p, 0.0, Qs, qs, prob.cs.copy(), G, h)
    z = np.r_[y0, s0 + 1.0]
    margin = 1e-3 * feas_tol

    def done(zz):
        return prob.max_res(zz[:nf]) < -margin

    z, t, steps, _, early = _barrier(ph, z, 1e-3 * feas_tol / bound, max_iter, stop=done)
    y = z[:nf]
    r = prob.max_res(y)
    if r < 0:
        return y, r, steps, None
    s_lb = z[nf] - ph.ncon / t
    if s_lb > feas_tol:
        return None, s_lb, steps, SolveStatus(StatusKind.INFEASIBLE,
                                              f"phase 1 bound: max residual >= {s_lb:.3e}")
    return y, max(r, 0.0), steps, None
