"""Convex underestimating relaxations of a DC QCQP over a box.

The concave piece ``-y'My`` (``M`` PSD) is replaced by the negative of an
affine majorant of ``y'My`` on the box.  The textbook affine bound
``(u+l)'My - u'Ml`` is exact for diagonal ``M`` and for ``M`` with
nonnegative off-diagonal entries, but can undercut ``y'My`` when ``M`` has
negative off-diagonal entries (``M = [[1,-1],[-1,1]]`` on the unit square at
``y = (1, 0)`` gives ``1 <= 0``).  :func:`overestimator_shift` returns the
smallest of two constant lifts that restore validity; both vanish in the
cases above, and the first keeps the worst-case gap at
``||M||_2 ||u-l||^2 / 4``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import QcqpInstance, QuadForm, spectral_norm, symmetrize
from .sco import DcInstance


class RelaxationKind(str, enum.Enum):
    MCCORMICK = "McCormick"
    SECANT = "Secant"


@dataclass(frozen=True)
class BoxRelaxation:
    instance: QcqpInstance
    box: tuple
    kind: RelaxationKind
    aux_count: int = 0

    def project(self, z) -> np.ndarray:
        """Drop auxiliary variables from a relaxation point."""
        z = np.asarray(z, dtype=float)
        return z[:z.size - self.aux_count] if self.aux_count else z


def _box(dc: DcInstance, box):
    lo, up = (np.asarray(b, dtype=float).reshape(-1) for b in box)
    if lo.size != dc.n or up.size != dc.n:
        raise ValueError(f"box vectors must have length {dc.n}")
    if np.any(lo > up):
        raise ValueError("box is empty")
    if np.any(~np.isfinite(lo)) or np.any(~np.isfinite(up)):
        raise ValueError("box must be bounded")
    return lo, up


def overestimator_shift(A, yl, yu, norm: float | None = None) -> float:
    """Constant that makes ``(yu+yl)'Ay - yu'A yl + shift`` majorize ``y'Ay`` on the box."""
    w = np.asarray(yu, dtype=float) - np.asarray(yl, dtype=float)
    if norm is None:
        norm = spectral_norm(A)
    spectral = 0.25 * max(0.0, norm * (w @ w) - w @ A @ w)
    neg = np.maximum(0.0, -A)
    np.fill_diagonal(neg, 0.0)
    offdiag = float(w @ neg @ w)
    return min(spectral, offdiag)


def quad_overestimator(A, yl, yu, check_psd: bool = True, norm: float | None = None):
    """Affine majorant ``linear'y + constant`` of ``y'Ay`` (A PSD) over ``[yl, yu]``."""
    A = symmetrize(A)
    yl = np.asarray(yl, dtype=float).reshape(-1)
    yu = np.asarray(yu, dtype=float).reshape(-1)
    if np.any(yl > yu):
        raise ValueError("lower bound exceeds upper bound")
    if check_psd:
        ev = np.linalg.eigvalsh(A) if A.size else np.zeros(0)
        if ev.size and ev.min() < -1e-8 * max(1.0, np.abs(ev).max()):
            raise ValueError(f"matrix is not PSD (min eigenvalue {ev.min():.3e})")
        if norm is None:
            norm = float(max(ev.max(initial=0.0), 0.0))
    linear = A @ (yu + yl)
    constant = -float(yu @ A @ yl) + overestimator_shift(A, yl, yu, norm)
    return linear, constant


@dataclass(frozen=True)
class BilinearEnvelope:
    """Affine bounds ``a*x + b*y + c`` on ``x*y``: two below, two above."""
    under: tuple
    over: tuple

    def lower(self, x, y):
        return np.maximum(*(a * x + b * y + c for a, b, c in self.under))

    def upper(self, x, y):
        return np.minimum(*(a * x + b * y + c for a, b, c in self.over))


def mccormick_bilinear(xl, xu, yl, yu) -> BilinearEnvelope:
    if xl > xu or yl > yu:
        raise ValueError("empty rectangle")
    under = ((yl, xl, -xl * yl), (yu, xu, -xu * yu))
    over = ((yl, xu, -xu * yl), (yu, xl, -xl * yu))
    return BilinearEnvelope(under, over)


def build_lower_relaxation_mccormick(dc: DcInstance, box) -> BoxRelaxation:
    lo, up = _box(dc, box)
    forms = []
    for qf, sp in zip(dc.forms, dc.splits):
        if sp.is_convex:
            forms.append(qf)
            continue
        lin, const = quad_overestimator(sp.minus, lo, up, check_psd=False, norm=sp.norm_minus)
        forms.append(QuadForm(sp.plus, np.asarray(qf.q) - lin, qf.c - const))
    inst = QcqpInstance(forms[0], tuple(forms[1:]), lo, up, dc.base.linear_ineqs)
    return BoxRelaxation(inst, (lo, up), RelaxationKind.MCCORMICK, 0)


def build_lower_relaxation_secant(dc: DcInstance, box) -> BoxRelaxation:
    """Bound ``y'My <= lambda_max(M) * sum(t)`` with ``y_i^2 <= t_i <= secant_i(y_i)``.

    Variables are ``(y, t)``; the ``t`` box is the range of ``y_i^2``.
    """
    lo, up = _box(dc, box)
    n = dc.n

    def lift(qf: QuadForm, plus, lam):
        Q = np.zeros((2 * n, 2 * n))
        Q[:n, :n] = plus
        return QuadForm(Q, np.r_[qf.q, -lam * np.ones(n)], qf.c)

    forms = [lift(qf, sp.plus, sp.norm_minus) for qf, sp in zip(dc.forms, dc.splits)]
    for i in range(n):
        Q = np.zeros((2 * n, 2 * n))
        Q[i, i] = 1.0
        q = np.zeros(2 * n)
        q[n + i] = -1.0
        forms.append(QuadForm(Q, q, 0.0))
    lin = [(np.r_[a, np.zeros(n)], b) for a, b in dc.base.linear_ineqs]
    for i in range(n):
        a = np.zeros(2 * n)
        a[i] = -(lo[i] + up[i])
        a[n + i] = 1.0
        lin.append((a, -lo[i] * up[i]))
    tlo = np.where((lo <= 0) & (up >= 0), 0.0, np.minimum(lo * lo, up * up))
    tup = np.maximum(lo * lo, up * up)
    inst = QcqpInstance(forms[0], tuple(forms[1:]), np.r_[lo, tlo], np.r_[up, tup], tuple(lin))
    return BoxRelaxation(inst, (lo, up), RelaxationKind.SECANT, n)


def gap_bound(dc: DcInstance, box):
    """Worst-case ``f - relaxed f`` (and per-constraint analogue) on the box."""
    lo, up = _box(dc, box)
    w2 = float((up - lo) @ (up - lo))
    gaps = np.array([0.25 * sp.norm_minus * w2 for sp in dc.splits])
    return float(gaps[0]), gaps[1:]
