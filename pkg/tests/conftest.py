import numpy as np
import pytest

from dcqcqp.generate import generate_instance
from dcqcqp.liquidation import LiquidationParams, build_qcqp
from dcqcqp.sco import DcInstance


def random_symmetric(rng, n, scale=1.0):
    M = rng.normal(scale=scale, size=(n, n))
    return 0.5 * (M + M.T)


def random_psd(rng, n, rank=None):
    B = rng.normal(size=(n, rank or n))
    return B @ B.T


def small_params(**kw):
    """m=1 instance with round numbers used by several hand computations."""
    d = dict(lambda_=[1.0], gamma=[0.5], p0=[4.0], x0=[1.0], e0=10.0, l0=100.0,
             rho1=2.0, rho2=2.0, pi=0.3, delta=0.0)
    d.update(kw)
    return LiquidationParams(**d)


def liquidation_dc(seed, m, **kw):
    p = generate_instance(seed, m, **kw)
    return p, DcInstance.from_instance(build_qcqp(p))


def nonconvex_seeds(m, count, gamma_ratio=3.0, start=0):
    """Seeds whose generated instance has at least one indefinite matrix."""
    out, s = [], start
    while len(out) < count:
        p, dc = liquidation_dc(s, m, gamma_ratio=gamma_ratio)
        if not dc.is_convex:
            out.append(s)
        s += 1
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
