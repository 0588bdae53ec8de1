import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sspc.effham import EffectiveEvaluator, dressed
from sspc.errors import DomainError, ValidationError
from sspc.polyinv import (PolySpec, alpha_lambda, apply_resolvent_approx, build_inverse_poly, check_grid,
                          eps_qsvt, eval_f, select_parameters)

from helpers import random_ev, random_hermitian


def test_alpha_lambda_examples():
    assert alpha_lambda(1, 1) == pytest.approx(2)
    assert alpha_lambda(2, 0) == pytest.approx(2.828427, abs=1e-6)
    assert alpha_lambda(1, 3) == pytest.approx(4.472136, abs=1e-6)
    with pytest.raises(ValidationError):
        alpha_lambda(0, 1)


def test_build_examples():
    ps = build_inverse_poly(0.5, 0.1, 2)
    assert abs(ps(1.0) - 0.25) <= 0.1
    x = np.linspace(-1, 1, 2001)
    assert np.abs(ps(-x) + ps(x)).max() < 1e-12
    ps = build_inverse_poly(0.1, 1e-3, 2)
    x = np.linspace(0.1, 1, 10_000)
    assert np.abs(ps(x) - 0.1 / (2 * x)).max() <= 1e-3
    assert ps.degree % 2 == 1 and ps.degree <= ps.degree_budget()


@pytest.mark.parametrize("args", [(0, 0.1, 2), (0.6, 0.1, 2), (0.1, 0, 2), (0.1, 0.6, 2), (0.1, 0.1, 1.0)])
def test_build_rejects_bad_parameters(args):
    with pytest.raises(ValidationError):
        build_inverse_poly(*args)


def test_polyspec_json_roundtrip():
    ps = build_inverse_poly(0.2, 1e-4)
    back = PolySpec.from_json(ps.to_json())
    assert back.degree == ps.degree
    assert np.array_equal(back.cheb_coeffs, ps.cheb_coeffs)


def test_eval_f_examples():
    ps = build_inverse_poly(0.5, 0.1, 2)
    assert abs(eval_f(ps, 1.0, 1.0) - 1.0) <= eps_qsvt(ps, 1.0)
    x = np.linspace(-1, 1, 101)
    assert np.allclose(eval_f(ps, 1.0, -x), -eval_f(ps, 1.0, x))
    inside = np.linspace(-0.49, 0.49, 99)
    assert np.all(np.abs(eval_f(ps, 1.0, inside)) <= 2 / 0.5)
    with pytest.raises(DomainError):
        eval_f(ps, 1.0, 1.5)


def test_resolvent_examples():
    ps = build_inverse_poly(0.25, 1e-4)
    r = apply_resolvent_approx(np.diag([1.0]), 0.0, ps, 2.0)
    assert not r.window_hit and abs(r.matrix[0, 0] - 1.0) <= r.eps_qsvt

    r = apply_resolvent_approx(np.diag([0.0, 1.0]), 0.0, ps, 2.0)
    assert r.window_hit
    assert abs(r.matrix[0, 0]) <= ps.beta / (2.0 * ps.delta)
    assert abs(r.matrix[1, 1] - 1.0) <= r.eps_qsvt


def test_resolvent_random_against_dense_inverse():
    rng = np.random.default_rng(6)
    for _ in range(50):
        h22 = random_hermitian(6, rng)
        g = np.min(np.abs(np.linalg.eigvalsh(h22) - 0.2))
        if g >= 0.3:
            break
    al = alpha_lambda(1.0, 0.2) * 1.0
    ps = build_inverse_poly(g / al, 1e-3)
    r = apply_resolvent_approx(h22, 0.2, ps, al)
    exact = np.linalg.inv(h22 - 0.2 * np.eye(6))
    assert np.linalg.norm(r.matrix - exact, 2) <= r.eps_qsvt


def test_resolvent_norm_precondition():
    ps = build_inverse_poly(0.25, 1e-3)
    with pytest.raises(ValidationError):
        apply_resolvent_approx(np.diag([5.0]), 0.0, ps, 2.0)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.05, 0.5), st.floats(1e-6, 1e-1), st.floats(1.2, 4.0))
def test_polyspec_contract(delta, eps, beta):
    ps = build_inverse_poly(delta, eps, beta)
    sup_abs, sup_err = check_grid(ps)
    assert sup_abs <= 1.0 and sup_err <= eps
    assert ps.degree <= ps.degree_budget()


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_dressed_term_error_bound(seed):
    h, ms, ev = random_ev(8, 2, seed)
    rng = np.random.default_rng(seed)
    lam = rng.uniform(-1, 1)
    g = np.min(np.abs(ev.chi - lam))
    if g < 0.02:
        return
    al = ev.alpha_lam(lam)
    delta, eps_poly = select_parameters(0.99 * g, 1e-3, al, al)
    ps = build_inverse_poly(delta, eps_poly)
    pev = EffectiveEvaluator(ev.blocks, mode=ps, alpha=ev.alpha)
    dev = np.linalg.norm(dressed(pev, lam) - dressed(ev, lam), 2)
    assert dev <= 3 * ev.alpha_tilde**2 * eps_qsvt(ps, al)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 1.0), st.floats(1e-5, 1e-2), st.floats(1.5, 4.0))
def test_delta_selection_rule(g, target, al):
    delta, eps_poly = select_parameters(g, target, al, al)
    ps = build_inverse_poly(delta, eps_poly)
    assert eps_qsvt(ps, al) <= target * (1 + 1e-12)
    x = np.concatenate([np.linspace(g, al, 500), -np.linspace(g, al, 500)])
    assert np.abs(eval_f(ps, al, x) - 1 / x).max() <= target
