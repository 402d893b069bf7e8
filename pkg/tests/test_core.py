import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from dcqcqp.core import (QcqpInstance, QuadForm, eval_quadform, is_feasible, jacobi_eigh,
                         make_instance, max_violation, residuals, spectral_norm, spectral_split)
from dcqcqp.liquidation import build_qcqp, second_period_state, start_point

from conftest import random_symmetric, small_params


def test_identity_split():
    sp = spectral_split(np.eye(2))
    assert np.allclose(sp.plus, np.eye(2))
    assert np.allclose(sp.minus, 0)
    assert sp.is_convex


def test_diagonal_split():
    sp = spectral_split(np.diag([1.0, -2.0]))
    assert np.allclose(sp.plus, np.diag([1.0, 0.0]), atol=1e-14)
    assert np.allclose(sp.minus, np.diag([0.0, 2.0]), atol=1e-14)
    assert sp.norm_minus == pytest.approx(2.0)


def test_zero_eigenvalue_goes_to_plus():
    sp = spectral_split(np.diag([0.0, -1.0]))
    assert np.count_nonzero(sp.eigvals >= 0) == 1
    assert np.allclose(sp.minus, np.diag([0.0, 1.0]))


def test_random_6x6_reconstruction(rng):
    M = random_symmetric(rng, 6)
    sp = spectral_split(M)
    assert np.abs(sp.plus - sp.minus - M).max() <= 1e-10


def test_jacobi_matches_lapack(rng):
    for n in (1, 2, 3, 8, 17, 40):
        M = random_symmetric(rng, n, scale=10.0)
        w, V = jacobi_eigh(M)
        assert np.allclose(np.sort(w), np.linalg.eigvalsh(M), atol=1e-10 * (1 + np.abs(M).max()))
        assert np.allclose(V.T @ V, np.eye(n), atol=1e-12)


def test_asymmetric_input_is_symmetrized():
    qf = QuadForm(np.array([[1.0, 2.0], [0.0, 1.0]]), np.zeros(2))
    assert np.array_equal(qf.Q, qf.Q.T)
    assert qf.Q[0, 1] == 1.0


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (5, 5), elements=st.floats(-1e3, 1e3)))
def test_split_invariants(A):
    M = 0.5 * (A + A.T)
    sp = spectral_split(M)
    norm = np.abs(np.linalg.eigvalsh(M)).max(initial=0.0)
    assert np.abs(sp.plus - sp.minus - M).max() <= 1e-10 * (1 + norm)
    for part in (sp.plus, sp.minus):
        assert np.linalg.eigvalsh(part).min() >= -1e-10 * max(norm, 1e-300) - 1e-300


def test_supporting_hyperplane(rng):
    for _ in range(5):
        minus = spectral_split(random_symmetric(rng, 6)).minus
        Y = rng.normal(size=(1000, 6)) * 3
        U = rng.normal(size=(1000, 6)) * 3
        lhs = np.einsum("ki,ij,kj->k", Y, minus, Y)
        rhs = 2 * np.einsum("ki,ij,kj->k", U, minus, Y) - np.einsum("ki,ij,kj->k", U, minus, U)
        assert np.all(lhs >= rhs - 1e-9 * (1 + np.abs(lhs)))


def test_spectral_norm():
    assert spectral_norm(np.zeros((3, 3))) == 0.0
    assert spectral_norm(np.diag([3.0, -5.0])) == pytest.approx(5.0)


def test_spectral_norm_random(rng):
    M = random_symmetric(rng, 8)
    assert spectral_norm(M) == pytest.approx(np.abs(np.linalg.eigvalsh(M)).max(), rel=1e-10)


def test_eval_quadform_examples():
    assert eval_quadform(QuadForm.zeros(3, c=3.0), np.array([1.0, -2.0, 7.0])) == 3.0
    assert eval_quadform(QuadForm(np.eye(2), np.zeros(2)), np.ones(2)) == 2.0
    with pytest.raises(ValueError):
        eval_quadform(QuadForm(np.eye(2), np.zeros(2)), np.ones(3))


def test_eval_matches_second_period_leverage():
    p = small_params(lambda_=[1.0], gamma=[0.5], rho2=2.0)
    h = build_qcqp(p).constraints[1]
    y = np.array([-0.5, -0.5])
    st_ = second_period_state(p, y, p.delta)
    assert h(y) == pytest.approx(st_.l - p.rho2 * st_.e, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(-10, 10), st.integers(0, 10_000))
def test_eval_linear_in_data(alpha, seed):
    rng = np.random.default_rng(seed)
    Q, q, c, y = random_symmetric(rng, 4), rng.normal(size=4), rng.normal(), rng.normal(size=4)
    base = eval_quadform(QuadForm(Q, q, c), y)
    scaled = eval_quadform(QuadForm(alpha * Q, alpha * q, alpha * c), y)
    assert scaled == pytest.approx(alpha * base, abs=1e-12 * (1 + abs(alpha * base)) + 1e-12)


def test_residual_order_and_box():
    inst = make_instance(np.eye(2), np.zeros(2), 0.0, lower=[-1, -1], upper=[1, 2])
    r = residuals(inst, np.array([1.0, 2.0]))
    assert r.shape == (4,)
    assert np.array_equal(r[2:], [0.0, 0.0])
    assert is_feasible(inst, np.zeros(2))


def test_residuals_match_forms(rng):
    g1 = QuadForm(random_symmetric(rng, 3), rng.normal(size=3), -1.0)
    g2 = QuadForm(random_symmetric(rng, 3), rng.normal(size=3), 0.5)
    inst = QcqpInstance(QuadForm.zeros(3), (g1, g2), -np.ones(3), np.ones(3), ((np.ones(3), 1.0),))
    y = rng.uniform(-1, 1, 3)
    r = residuals(inst, y)
    assert r[0] == pytest.approx(g1(y))
    assert r[1] == pytest.approx(g2(y))
    assert r[2] == pytest.approx(y.sum() - 1.0)
    assert np.allclose(r[3:6], -1 - y)
    assert np.allclose(r[6:], y - 1)


def test_is_feasible_tolerance():
    inst = make_instance(np.eye(2), np.zeros(2), 0.0, lower=[0, 0], upper=[1, 1])
    tol = 1e-6
    assert not is_feasible(inst, np.array([1 + 2 * tol, 0.5]), tol)
    assert is_feasible(inst, np.array([1 + 0.5 * tol, 0.5]), tol)
    assert max_violation(inst, np.array([1.5, 0.5])) == pytest.approx(0.5)


def test_start_point_feasible_under_assumptions():
    from dcqcqp.generate import generate_instance
    p = generate_instance(1, 3)
    assert is_feasible(build_qcqp(p), start_point(p))


def test_instance_validation():
    with pytest.raises(ValueError):
        QcqpInstance(QuadForm(np.eye(2), np.zeros(2)), (QuadForm(np.eye(3), np.zeros(3)),))
    with pytest.raises(ValueError):
        QcqpInstance(QuadForm(np.eye(2), np.zeros(2)), (), [1, 0], [0, 0])
    with pytest.raises(ValueError):
        QuadForm(np.eye(2), np.zeros(3))
