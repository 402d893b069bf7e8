"""Independent reference computations used by the tests."""

import itertools

import numpy as np


def triangle_row_oracle(H, b, s, resolution=2e-4):
    """Minimize y'Hy - b'y over {y <= 0, y1 + y2 >= -s} on a grid of y1 values.

    Each grid row is a 1-D quadratic in y2 minimized exactly over its
    segment.  Returns ``(value, error_bound)`` where the bound covers the
    y1 discretization.
    """
    h = resolution * s
    y1 = np.linspace(-s, 0.0, int(round(1 / resolution)) + 1)
    lo, hi = -s - y1, np.zeros_like(y1)
    a = H[1, 1]
    lin = 2 * H[0, 1] * y1 - b[1]
    const = H[0, 0] * y1 ** 2 - b[0] * y1

    def val(y2):
        return a * y2 ** 2 + lin * y2 + const

    cands = [val(lo), val(hi)]
    if a > 0:
        st = np.clip(-lin / (2 * a), lo, hi)
        cands.append(val(st))
    best = np.min(np.vstack(cands), axis=0)
    # gradient bound along y1 over the triangle
    grad = np.abs(b[0]) + 2 * (abs(H[0, 0]) + abs(H[0, 1])) * s
    return float(best.min()), grad * h / 2


def lp_vertex_oracle(c, A, b):
    """Maximize c'x over {Ax <= b} by enumerating all vertices."""
    n = c.size
    best = -np.inf
    for rows in itertools.combinations(range(A.shape[0]), n):
        M = A[list(rows)]
        if abs(np.linalg.det(M)) < 1e-10:
            continue
        x = np.linalg.solve(M, b[list(rows)])
        if np.all(A @ x <= b + 1e-8):
            best = max(best, c @ x)
    return best


def sample_box(rng, lo, up, k):
    return rng.uniform(lo, up, size=(k, lo.size))
