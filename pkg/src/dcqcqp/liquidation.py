"""Two-period portfolio liquidation under a Bernoulli equity-withdrawal shock.

Decision ``y = (y1, y2)`` holds the (nonpositive) trades of ``m`` assets in
the two periods.  The investor maximizes expected second-period equity
subject to a leverage cap in each period; the second cap is enforced for
the worst case, i.e. with the shock realized.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from .core import QcqpInstance, QuadForm, eval_quadform
from .status import PreconditionError


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class LiquidationParams:
    lambda_: np.ndarray  # temporary impact (diagonal of Lambda)
    gamma: np.ndarray    # permanent impact (diagonal of Gamma)
    p0: np.ndarray
    x0: np.ndarray
    e0: float
    l0: float
    rho1: float
    rho2: float
    pi: float
    delta: float = 0.0

    def __post_init__(self):
        vecs = {}
        for name in ("lambda_", "gamma", "p0", "x0"):
            v = np.array(getattr(self, name), dtype=float).reshape(-1)
            v.setflags(write=False)
            vecs[name] = v
            object.__setattr__(self, name, v)
        sizes = {k: v.size for k, v in vecs.items()}
        if len(set(sizes.values())) != 1 or vecs["x0"].size < 1:
            raise ParameterError(f"asset vectors must share a positive length, got {sizes}")
        for name in ("e0", "l0", "rho1", "rho2", "pi", "delta"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def m(self) -> int:
        return self.x0.size

    def replace(self, **kw) -> "LiquidationParams":
        d = {k: getattr(self, k) for k in ("lambda_", "gamma", "p0", "x0", "e0", "l0",
                                           "rho1", "rho2", "pi", "delta")}
        d.update(kw)
        return LiquidationParams(**d)

    def validate(self):
        """Raise :class:`ParameterError` naming the first violated model assumption."""
        if np.any(self.lambda_ <= 0):
            raise ParameterError("temporary impact lambda must be positive componentwise")
        if np.any(self.gamma <= 0):
            raise ParameterError("permanent impact gamma must be positive componentwise")
        if np.any(self.x0 <= 0):
            raise ParameterError("initial holdings x0 must be positive componentwise")
        if not 0.0 <= self.pi <= 1.0:
            raise ParameterError(f"shock probability pi={self.pi} outside [0, 1]")
        if self.delta < 0:
            raise ParameterError(f"shock size delta={self.delta} must be nonnegative")
        if not self.rho1 * self.e0 - self.l0 < 0:
            raise ParameterError(
                f"initial position must breach the first leverage cap: rho1*e0 - l0 = {self.rho1 * self.e0 - self.l0:.6g} is not < 0")


@dataclass(frozen=True)
class PeriodState:
    e: float
    l: float
    leverage: float | None = field(default=None)

    @classmethod
    def of(cls, e, l):
        e, l = float(e), float(l)
        return cls(e, l, l / e if e > 0 else None)


def _split(p: LiquidationParams, y):
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size != 2 * p.m:
        raise ValueError(f"expected {2 * p.m} trade variables, got {y.size}")
    return y[:p.m], y[p.m:]


def first_period_state(p: LiquidationParams, y1) -> PeriodState:
    y1 = np.asarray(y1, dtype=float).reshape(-1)
    lam, gam = p.lambda_, p.gamma
    e1 = p.e0 + (gam * p.x0) @ y1 - y1 @ ((lam - gam / 2) * y1)
    l1 = p.l0 + p.p0 @ y1 + y1 @ ((lam + gam / 2) * y1)
    return PeriodState.of(e1, l1)


def second_period_state(p: LiquidationParams, y, shock: float) -> PeriodState:
    y1, y2 = _split(p, y)
    lam, gam = p.lambda_, p.gamma
    s = y1 + y2
    quad_l = y1 @ ((lam + gam / 2) * y1) + y2 @ ((lam + gam / 2) * y2) + y1 @ (gam * y2)
    quad_e = y1 @ ((lam - gam / 2) * y1) + y2 @ ((lam - gam / 2) * y2) - y1 @ (gam * y2)
    l2 = p.l0 + shock + p.p0 @ s + quad_l
    e2 = p.e0 - shock + (gam * p.x0) @ s - quad_e
    return PeriodState.of(e2, l2)


def expected_equity(p: LiquidationParams, y) -> float:
    y1, _ = _split(p, y)
    e1 = first_period_state(p, y1).e
    e2 = second_period_state(p, y, p.delta).e
    return (1 - p.pi) * e1 + p.pi * e2


def _blocks(d11, d12, d22):
    return np.block([[np.diag(d11), np.diag(d12)], [np.diag(d12), np.diag(d22)]])


def build_qcqp(p: LiquidationParams) -> QcqpInstance:
    """Minimization form: objective is minus expected equity, constraints are
    ``l1 - rho1*e1 <= 0`` and ``l2 - rho2*e2 <= 0`` (shock realized)."""
    p.validate()
    return _assemble(p)


def _assemble(p: LiquidationParams) -> QcqpInstance:
    m = p.m
    lam, gam, x0, p0 = p.lambda_, p.gamma, p.x0, p.p0
    z = np.zeros(m)
    Q0 = _blocks(lam - gam / 2, -p.pi * gam / 2, p.pi * (lam - gam / 2))
    q0 = -np.concatenate([gam * x0, p.pi * gam * x0])
    c0 = p.pi * p.delta - p.e0
    Q1 = _blocks(p.rho1 * (lam - gam / 2) + lam + gam / 2, z, z)
    q1 = np.concatenate([p0 - p.rho1 * gam * x0, z])
    c1 = p.l0 - p.rho1 * p.e0
    T = lam + gam / 2 + p.rho2 * (lam - gam / 2)
    S = (1 - p.rho2) / 2 * gam
    Q2 = _blocks(T, S, T)
    q2 = np.concatenate([p0 - p.rho2 * gam * x0, p0 - p.rho2 * gam * x0])
    c2 = p.l0 - p.rho2 * p.e0 + (p.rho2 + 1) * p.delta
    lower = -np.concatenate([x0, x0])
    upper = np.zeros(2 * m)
    # -(y1_i + y2_i) <= x0_i
    eye = np.eye(m)
    lin = tuple((-np.concatenate([eye[i], eye[i]]), x0[i]) for i in range(m))
    return QcqpInstance(QuadForm(Q0, q0, c0), (QuadForm(Q1, q1, c1), QuadForm(Q2, q2, c2)),
                        lower, upper, lin)


def start_point(p: LiquidationParams) -> np.ndarray:
    """Half of the holdings sold in each period."""
    return -np.concatenate([p.x0, p.x0]) / 2


def first_leverage_slack(p: LiquidationParams, y1) -> float:
    st = first_period_state(p, y1)
    return p.rho1 * st.e - st.l


def second_leverage_slack(p: LiquidationParams, y, shock=None) -> float:
    st = second_period_state(p, y, p.delta if shock is None else shock)
    return p.rho2 * st.e - st.l


def shock_objective(p: LiquidationParams) -> QuadForm:
    """``G(y)``: the part of ``rho2*e2 - l2`` that depends on the trades."""
    lam, gam = p.lambda_, p.gamma
    T = p.rho2 * (lam - gam / 2) + lam + gam / 2
    S = (1 - p.rho2) / 2 * gam
    w = p.rho2 * gam * p.x0 - p.p0
    return QuadForm(-_blocks(T, S, T), np.concatenate([w, w]), 0.0)


def sufficient_conditions(p: LiquidationParams) -> np.ndarray:
    """Per-asset flag: full two-period liquidation in equal halves maximizes ``G``."""
    lam, gam, x0, p0, r = p.lambda_, p.gamma, p.x0, p.p0, p.rho2
    k = r * (lam - gam) + (lam + gam)
    zero = np.abs(k) <= 1e-12 * (r + 1) * (lam + gam)
    pos = ~zero & (k > 0) & (p0 > (r + 1) * lam * x0 + gam * x0)
    flat = zero & (p0 > r * gam * x0)
    neg = ~zero & (k < 0) & (p0 > 0.5 * (r + 1) * (lam + gam) * x0)
    return pos | flat | neg


def first_cap_bracket(p: LiquidationParams):
    """``(holds, slack at y1=0, slack at y1=-x0/2)`` for the first leverage cap."""
    s0 = first_leverage_slack(p, np.zeros(p.m))
    sh = first_leverage_slack(p, -p.x0 / 2)
    return (s0 < 0 and sh > 0), s0, sh


def _shock_feasible_region(p: LiquidationParams, Y1):
    """Feasibility of grid points ``y1`` (rows of Y1) for the first leverage cap."""
    lam, gam = p.lambda_, p.gamma
    e1 = p.e0 + Y1 @ (gam * p.x0) - np.einsum("ki,i,ki->k", Y1, lam - gam / 2, Y1)
    l1 = p.l0 + Y1 @ p.p0 + np.einsum("ki,i,ki->k", Y1, lam + gam / 2, Y1)
    return p.rho1 * e1 - l1 >= 0


def max_shock_objective_grid(p: LiquidationParams, resolution: float = 1e-3,
                             max_points: int = 4_000_000):
    """Grid maximization of ``G`` over the first-cap region with
    ``-x0 <= y1 <= 0`` and ``-x0 <= y1 + y2 <= 0``; returns ``(G*, y*)``."""
    m = p.m
    nper = int(round(1.0 / resolution)) + 1
    nper = max(3, min(nper, int(max_points ** (1.0 / (2 * m)))))
    t = np.linspace(-1.0, 0.0, nper)
    axes = [t * p.x0[i] for i in range(m)] * 2
    best, best_y = -np.inf, None
    # iterate over the y1 grid in chunks, vectorize over the sum grid
    y1_grid = np.stack(np.meshgrid(*axes[:m], indexing="ij"), -1).reshape(-1, m)
    s_grid = np.stack(np.meshgrid(*axes[m:], indexing="ij"), -1).reshape(-1, m)
    ok = _shock_feasible_region(p, y1_grid)
    y1_grid = y1_grid[ok]
    lam, gam = p.lambda_, p.gamma
    T = p.rho2 * (lam - gam / 2) + lam + gam / 2
    S = (1 - p.rho2) / 2 * gam
    w = p.rho2 * gam * p.x0 - p.p0
    chunk = max(1, 2_000_000 // max(1, s_grid.shape[0]))
    for k in range(0, y1_grid.shape[0], chunk):
        Y1 = y1_grid[k:k + chunk][:, None, :]
        Y2 = s_grid[None, :, :] - Y1
        val = ((s_grid[None] * w).sum(-1)
               - (T * Y1 * Y1).sum(-1) - (T * Y2 * Y2).sum(-1) - 2 * (S * Y1 * Y2).sum(-1))
        i = np.unravel_index(np.argmax(val), val.shape)
        if val[i] > best:
            best = float(val[i])
            best_y = np.concatenate([Y1[i[0], 0], Y2[i]])
    if best_y is None:
        raise PreconditionError("no grid point satisfies the first leverage constraint")
    return best, best_y


def shock_capacity(p: LiquidationParams, method: str = "auto", resolution: float = 1e-3):
    """Largest withdrawal the second leverage cap can absorb.

    Returns ``(delta_max, closed_form_valid)``.  With ``method="auto"`` the
    closed form is used when every asset meets a sufficient condition,
    otherwise ``G`` is maximized on a grid.
    """
    holds, s0, sh = first_cap_bracket(p)
    if not holds:
        which = "slack at y1=0 must be < 0" if not s0 < 0 else "slack at y1=-x0/2 must be > 0"
        raise PreconditionError(
            f"first leverage cap not bracketed ({which}): rho1*e1-l1 = {s0:.6g} at y1=0, {sh:.6g} at y1=-x0/2")
    valid = bool(np.all(sufficient_conditions(p)))
    base = p.rho2 * p.e0 - p.l0
    if method == "closed" or (method == "auto" and valid):
        g = eval_quadform(shock_objective(p), start_point(p))
    elif method in ("auto", "grid"):
        if 2 * p.m <= 4:
            g, _ = max_shock_objective_grid(p, resolution)
        else:
            g = _max_shock_objective_bb(p)
    else:
        raise ValueError(f"unknown method {method!r}")
    return (base + g) / (p.rho2 + 1), valid


def _max_shock_objective_bb(p: LiquidationParams) -> float:
    from .bb import run_scobb
    from .sco import DcInstance

    m = p.m
    G = shock_objective(p)
    inst = build_qcqp(p.replace(delta=0.0))
    neg = QuadForm(-G.Q, -G.q, 0.0)
    lin = tuple((np.concatenate([np.eye(m)[i], np.eye(m)[i]]), 0.0) for i in range(m)) + \
        tuple((-np.concatenate([np.eye(m)[i], np.eye(m)[i]]), p.x0[i]) for i in range(m))
    lower = -np.concatenate([p.x0, 2 * p.x0])
    upper = np.concatenate([np.zeros(m), p.x0])
    sub = QcqpInstance(neg, (inst.constraints[0],), lower, upper, lin)
    rep = run_scobb(DcInstance.from_instance(sub), eps=1e-6, y0=start_point(p))
    return -rep.upper


@dataclass(frozen=True)
class ActivityReport:
    slack: float          # |rho2*e2 - l2|
    signed_slack: float   # rho2*e2 - l2
    leverage: float | None
    active: bool


def check_optimality_activity(p: LiquidationParams, y, tol: float = 1e-6) -> ActivityReport:
    st = second_period_state(p, y, p.delta)
    s = p.rho2 * st.e - st.l
    return ActivityReport(abs(s), s, st.leverage, abs(s) <= tol * (1 + abs(st.l)))


@dataclass(frozen=True)
class AssumptionReport:
    overleveraged: bool
    initial_slack: float
    half_sale_restores: bool
    first_cap_slacks: tuple
    slater: bool
    slater_value: float

    @property
    def all_hold(self) -> bool:
        return self.overleveraged and self.half_sale_restores and self.slater

    def as_dict(self):
        return asdict(self)


def check_assumptions(p: LiquidationParams) -> AssumptionReport:
    """Standing conditions of the liquidation model and Slater's condition.

    Slater is tested at the box midpoint and at the equal-halves start
    point: both leverage constraints strictly negative, the point strictly
    inside the box and within the linear inequalities.
    """
    excess = p.rho1 * p.e0 - p.l0
    bracketed, s0, sh = first_cap_bracket(p)
    inst = _assemble(p)
    A, b = inst.linear_matrix()
    slater_v = np.inf
    for y in (0.5 * (inst.lower + inst.upper), start_point(p)):
        if np.all(y > inst.lower) and np.all(y < inst.upper) and np.all(A @ y - b <= 0):
            slater_v = min(slater_v, max(eval_quadform(g, y) for g in inst.constraints))
    return AssumptionReport(bool(excess < 0), float(excess), bool(bracketed), (float(s0), float(sh)),
                            bool(slater_v < 0), float(slater_v))
