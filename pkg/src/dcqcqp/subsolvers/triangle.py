"""Closed-form minimizer of a 2-D quadratic over the right triangle O, A, B.

The triangle has vertices ``O=(0,0)``, ``A=(-s,0)``, ``B=(0,-s)``.  The
global minimizer lies at a vertex, at the clamped stationary point of one
of the three edges, or (for positive definite ``H``) at the unconstrained
stationary point, so evaluating that finite candidate set is exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_DENOM_TOL = 1e-14


@dataclass(frozen=True)
class Triangle2dProblem:
    """``min y'Hy - b'y`` over the triangle with legs of length ``x0i``."""

    H: np.ndarray
    b: np.ndarray
    x0i: float

    def __post_init__(self):
        H = np.asarray(self.H, dtype=float).reshape(2, 2)
        object.__setattr__(self, "H", 0.5 * (H + H.T))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float).reshape(2))
        if not self.x0i > 0:
            raise ValueError(f"triangle scale must be positive, got {self.x0i}")

    def value(self, y) -> float:
        y = np.asarray(y, dtype=float)
        return float(y @ self.H @ y - self.b @ y)


def _clamp(v, s):
    return max(min(v, 0.0), -s)


def triangle_candidates(p: Triangle2dProblem):
    """Candidate points in tie-break order O, A, B, y_OA, y_OB, y_AB, interior."""
    H, b, s = p.H, p.b, float(p.x0i)
    h11, h12, h22 = H[0, 0], H[0, 1], H[1, 1]
    cands = [np.array([0.0, 0.0]), np.array([-s, 0.0]), np.array([0.0, -s])]
    if 2 * h11 > _DENOM_TOL:
        cands.append(np.array([_clamp(b[0] / (2 * h11), s), 0.0]))
    if 2 * h22 > _DENOM_TOL:
        cands.append(np.array([0.0, _clamp(b[1] / (2 * h22), s)]))
    curv = h11 + h22 - 2 * h12
    if 2 * curv > _DENOM_TOL:
        t = _clamp((b[0] - b[1] + 2 * s * (h12 - h22)) / (2 * curv), s)
        cands.append(np.array([t, -s - t]))
    det = h11 * h22 - h12 * h12
    if h11 > 0 and det > _DENOM_TOL * max(1.0, h11 * h22):
        y = 0.5 * np.linalg.solve(H, b)
        if y[0] <= 0 and y[1] <= 0 and y[0] + y[1] >= -s:
            cands.append(y)
    return cands


def triangle2d_min(p: Triangle2dProblem):
    """Return ``(y, value)``; the first candidate attaining the minimum wins."""
    best_y, best_v = None, np.inf
    for y in triangle_candidates(p):
        v = p.value(y)
        if v < best_v:
            best_y, best_v = y, v
    return best_y, best_v
