"""Problem representation and symmetric-matrix machinery.

Every algorithm in the package works on a :class:`QcqpInstance`::

    min  y'Q0y + q0'y + c0
    s.t. y'Qjy + qj'y + cj <= 0      j = 1..m
         a_k'y <= b_k                 (extra linear inequalities)
         lower <= y <= upper

Indefinite matrices are split into a difference of two PSD matrices with a
cyclic Jacobi eigendecomposition (:func:`spectral_split`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np


class EigenConvergenceError(RuntimeError):
    """Jacobi sweeps did not drive the off-diagonal mass to zero."""


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


def symmetrize(M) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if M.shape[0] < 1:
        raise ValueError("matrix dimension must be >= 1")
    return 0.5 * (M + M.T)


@dataclass(frozen=True)
class QuadForm:
    """``y'Qy + q'y + c``; ``Q`` is symmetrized on construction."""

    Q: np.ndarray
    q: np.ndarray
    c: float = 0.0

    def __post_init__(self):
        Q = symmetrize(self.Q)
        q = np.asarray(self.q, dtype=float).reshape(-1)
        if q.shape[0] != Q.shape[0]:
            raise ValueError(f"Q is {Q.shape[0]}x{Q.shape[0]} but q has length {q.shape[0]}")
        object.__setattr__(self, "Q", _frozen(Q))
        object.__setattr__(self, "q", _frozen(q))
        object.__setattr__(self, "c", float(self.c))

    @property
    def n(self) -> int:
        return self.q.shape[0]

    @classmethod
    def zeros(cls, n: int, c: float = 0.0) -> "QuadForm":
        return cls(np.zeros((n, n)), np.zeros(n), c)

    def __call__(self, y) -> float:
        return eval_quadform(self, y)

    def gradient(self, y) -> np.ndarray:
        return 2.0 * self.Q @ np.asarray(y, dtype=float) + self.q


@dataclass(frozen=True)
class QcqpInstance:
    objective: QuadForm
    constraints: tuple = ()
    lower: np.ndarray = None
    upper: np.ndarray = None
    linear_ineqs: tuple = ()

    def __post_init__(self):
        n = self.objective.n
        cons = tuple(self.constraints)
        for j, g in enumerate(cons):
            if not isinstance(g, QuadForm):
                raise TypeError(f"constraint {j} is not a QuadForm")
            if g.n != n:
                raise ValueError(f"constraint {j} has dimension {g.n}, objective has {n}")
        lo = np.full(n, -np.inf) if self.lower is None else np.asarray(self.lower, dtype=float).reshape(-1)
        up = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float).reshape(-1)
        if lo.shape[0] != n or up.shape[0] != n:
            raise ValueError("bound vectors must have the objective's dimension")
        if np.any(lo > up):
            bad = int(np.argmax(lo > up))
            raise ValueError(f"lower[{bad}]={lo[bad]} exceeds upper[{bad}]={up[bad]}")
        lin = []
        for k, (a, b) in enumerate(self.linear_ineqs):
            a = np.asarray(a, dtype=float).reshape(-1)
            if a.shape[0] != n:
                raise ValueError(f"linear inequality {k} has length {a.shape[0]}, expected {n}")
            lin.append((_frozen(a), float(b)))
        object.__setattr__(self, "constraints", cons)
        object.__setattr__(self, "lower", _frozen(lo))
        object.__setattr__(self, "upper", _frozen(up))
        object.__setattr__(self, "linear_ineqs", tuple(lin))

    @property
    def n(self) -> int:
        return self.objective.n

    @property
    def m(self) -> int:
        return len(self.constraints)

    def linear_matrix(self):
        """Stack the extra linear inequalities as ``(A, b)``."""
        if not self.linear_ineqs:
            return np.zeros((0, self.n)), np.zeros(0)
        A = np.vstack([a for a, _ in self.linear_ineqs])
        b = np.array([b for _, b in self.linear_ineqs])
        return A, b

    def with_box(self, lower, upper) -> "QcqpInstance":
        return QcqpInstance(self.objective, self.constraints, lower, upper, self.linear_ineqs)


@dataclass(frozen=True)
class SpectralSplit:
    """``M = plus - minus`` with both parts PSD."""

    plus: np.ndarray
    minus: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray
    norm_minus: float = field(init=False)

    def __post_init__(self):
        for name in ("plus", "minus", "eigvals", "eigvecs"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        neg = self.eigvals[self.eigvals < 0]
        object.__setattr__(self, "norm_minus", float(-neg.min()) if neg.size else 0.0)

    @property
    def is_convex(self) -> bool:
        return self.norm_minus == 0.0


@lru_cache(maxsize=None)
def _round_robin(n: int):
    """Pairings for a parallel Jacobi sweep; every pair appears once per sweep."""
    size = n + (n % 2)
    idx = list(range(size))
    rounds = []
    for _ in range(size - 1):
        pairs = [(idx[k], idx[size - 1 - k]) for k in range(size // 2)]
        pairs = [(min(p, q), max(p, q)) for p, q in pairs if p < n and q < n]
        if pairs:
            rounds.append((np.array([p for p, _ in pairs]), np.array([q for _, q in pairs])))
        idx = [idx[0]] + [idx[-1]] + idx[1:-1]
    return rounds


def jacobi_eigh(M, tol: float = 1e-15, max_sweeps: int = 60):
    """Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric matrix.

    Cyclic Jacobi with round-robin ordering, so that each round applies
    ``n/2`` disjoint rotations at once.
    """
    A = symmetrize(M).copy()
    n = A.shape[0]
    V = np.eye(n)
    scale = np.linalg.norm(A)
    if n == 1 or scale == 0.0:
        w = np.diag(A).copy()
        order = np.argsort(w, kind="stable")
        return w[order], V[:, order]
    rounds = _round_robin(n)
    offdiag = ~np.eye(n, dtype=bool)

    def off():
        return float(np.linalg.norm(A[offdiag]))

    for sweep in range(max_sweeps):
        if off() <= tol * scale:
            break
        for P, Q in rounds:
            apq = A[P, Q]
            active = np.abs(apq) > 1e-300
            if not np.any(active):
                continue
            P, Q, apq = P[active], Q[active], apq[active]
            app, aqq = A[P, P], A[Q, Q]
            tau = (aqq - app) / (2.0 * apq)
            big = np.abs(tau) > 1e150
            tau_s = np.where(big, 1.0, tau)
            t = np.where(big, 0.5 / np.where(big, tau, 1.0),
                         np.sign(tau_s) / (np.abs(tau_s) + np.sqrt(1.0 + tau_s * tau_s)))
            t[tau == 0] = 1.0
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            J = np.eye(n)
            J[P, P] = c
            J[Q, Q] = c
            J[P, Q] = s
            J[Q, P] = -s
            A = J.T @ A @ J
            A[P, Q] = 0.0
            A[Q, P] = 0.0
            V = V @ J
    else:
        if off() > 1e3 * tol * scale:
            d = np.abs(np.diag(A))
            cond = d.max() / max(d.min(), np.finfo(float).tiny)
            raise EigenConvergenceError(
                f"Jacobi did not converge in {max_sweeps} sweeps: off-diagonal norm "
                f"{off():.3e}, Frobenius norm {scale:.3e}, diagonal ratio {cond:.3e}"
            )
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def spectral_split(M) -> SpectralSplit:
    """Split ``M`` into PSD parts; zero eigenvalues go to ``plus``."""
    w, U = jacobi_eigh(M)
    pos = np.where(w >= 0, w, 0.0)
    neg = np.where(w < 0, -w, 0.0)
    plus = (U * pos) @ U.T
    minus = (U * neg) @ U.T
    return SpectralSplit(0.5 * (plus + plus.T), 0.5 * (minus + minus.T), w, U)


def spectral_norm(M) -> float:
    w, _ = jacobi_eigh(M)
    return float(np.max(np.abs(w)))


def eval_quadform(qf: QuadForm, y) -> float:
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape[0] != qf.n:
        raise ValueError(f"point has length {y.shape[0]}, form expects {qf.n}")
    return float(y @ qf.Q @ y + qf.q @ y + qf.c)


def residuals(inst: QcqpInstance, y) -> np.ndarray:
    """Constraint values at ``y``; nonpositive entries are satisfied.

    Order: quadratic constraints, linear inequalities ``a'y - b``, then
    ``lower - y`` and ``y - upper`` (infinite bounds give ``-inf``).
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape[0] != inst.n:
        raise ValueError(f"point has length {y.shape[0]}, instance has {inst.n} variables")
    quad = [eval_quadform(g, y) for g in inst.constraints]
    A, b = inst.linear_matrix()
    with np.errstate(invalid="ignore"):
        lo = inst.lower - y
        up = y - inst.upper
    return np.concatenate([np.array(quad, dtype=float), A @ y - b, lo, up])


def is_feasible(inst: QcqpInstance, y, tol: float = 1e-9) -> bool:
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    r = residuals(inst, y)
    return bool(np.all(r <= tol))


def max_violation(inst: QcqpInstance, y) -> float:
    r = residuals(inst, y)
    return float(max(0.0, r.max())) if r.size else 0.0


def make_instance(Q0, q0, c0=0.0, constraints: Sequence = (), lower=None, upper=None,
                  linear_ineqs: Sequence = ()) -> QcqpInstance:
    """Convenience constructor from raw arrays; constraints are ``(Q, q, c)`` triples."""
    cons = tuple(g if isinstance(g, QuadForm) else QuadForm(*g) for g in constraints)
    return QcqpInstance(QuadForm(Q0, q0, c0), cons, lower, upper, tuple(linear_ineqs))
