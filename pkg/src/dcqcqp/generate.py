"""Seeded liquidation instances.

Impact coefficients: ``lambda_i ~ U[0.5, 2]``, ``gamma_i ~ U[0.1, r*lambda_i)``
with ``r = gamma_ratio`` (1 keeps every matrix PSD; larger values make
assets with ``gamma_i`` well above ``lambda_i`` nonconvex).  Holdings
``x0_i ~ U[1, 10]``.  Prices are set a random margin above the larger of the
bound that makes equal-halves liquidation optimal for the shock capacity
and the bound that makes selling half of an asset relieve first-period
leverage.  Equity and liabilities satisfy the balance sheet
``e0 + l0 = p0'x0`` with ``l0 = rho1*e0 + theta*S``, where ``S`` is the
first-period leverage relief of selling half of everything.
"""

from __future__ import annotations

import numpy as np

from .liquidation import LiquidationParams, check_assumptions, shock_capacity


class GenerationError(RuntimeError):
    pass


def _price_floor(lam, gam, x0, rho1, rho2):
    k = rho2 * (lam - gam) + (lam + gam)
    capacity = np.where(k > 0, (rho2 + 1) * lam * x0 + gam * x0,
                        np.where(k < 0, 0.5 * (rho2 + 1) * (lam + gam) * x0, rho2 * gam * x0))
    relief = (0.5 * (rho1 + 1) * lam + 0.75 * rho1 * gam + 0.25 * gam) * x0
    return np.maximum(capacity, relief)


def generate_instance(seed: int, m: int, pi: float = 0.3, delta_frac: float = 0.8,
                      rho1: float = 18.0, rho2: float = 18.0, gamma_ratio: float = 1.0,
                      max_attempts: int = 100) -> LiquidationParams:
    if m < 1:
        raise ValueError("m must be >= 1")
    if not 0.0 <= pi <= 1.0:
        raise ValueError("pi must lie in [0, 1]")
    if not 0.0 <= delta_frac < 1.0:
        raise ValueError("delta_frac must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    reasons = []
    for attempt in range(max_attempts):
        lam = rng.uniform(0.5, 2.0, m)
        gam = rng.uniform(0.1, gamma_ratio * lam)
        x0 = rng.uniform(1.0, 10.0, m)
        p0 = _price_floor(lam, gam, x0, rho1, rho2) * rng.uniform(1.05, 1.5, m)
        relief = (0.5 * (p0 - rho1 * gam * x0) @ x0
                  - 0.25 * x0 @ ((rho1 * (lam - gam / 2) + lam + gam / 2) * x0))
        theta = rng.uniform(0.3, 0.7)
        if relief <= 0:
            reasons.append(f"attempt {attempt}: nonpositive leverage relief {relief:.3g}")
            continue
        e0 = (p0 @ x0 - theta * relief) / (1 + rho1)
        l0 = rho1 * e0 + theta * relief
        p = LiquidationParams(lam, gam, p0, x0, e0, l0, rho1, rho2, pi, 0.0)
        rep = check_assumptions(p)
        if not (rep.overleveraged and rep.half_sale_restores):
            reasons.append(f"attempt {attempt}: assumptions {rep.as_dict()}")
            continue
        dmax, _ = shock_capacity(p)
        if not dmax > 0:
            reasons.append(f"attempt {attempt}: shock capacity {dmax:.3g} <= 0")
            continue
        p = p.replace(delta=delta_frac * dmax)
        if not check_assumptions(p).all_hold:
            reasons.append(f"attempt {attempt}: {check_assumptions(p).as_dict()}")
            continue
        return p
    raise GenerationError(f"no valid instance after {max_attempts} attempts; last: {reasons[-3:]}")
