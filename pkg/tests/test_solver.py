import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sspc.effham import EffectiveEvaluator
from sspc.errors import NonConvergenceError, ValidationError
from sspc.models import engineered_instance
from sspc.oracle import OracleConfig
from sspc.partition import ModelSpace
from sspc.solver import (BisectionConfig, Oracle, bisect, cluster_representative, detect_degenerate,
                         init_bracket, solve_window, track_branches)

from helpers import LAM_MINUS, LAM_PLUS, TOY, decoupled, random_ev, toy_ev

GAMMA2_TOY = 0.723607


def _nearest(w, lam):
    return float(np.min(np.abs(w - lam)))


def test_config_defaults_and_validation():
    cfg = BisectionConfig()
    assert cfg.eps_root == cfg.eps_approx
    m = BisectionConfig.matched(1e-4)
    assert m.eps_root == m.eps_approx == 1e-4
    with pytest.raises(ValidationError):
        BisectionConfig(eps_root=0)
    with pytest.raises(ValidationError):
        BisectionConfig(theta0=1.0)


def test_init_bracket_examples():
    h, ms = decoupled(0.3, np.diag([2.0]))
    oracle = Oracle(EffectiveEvaluator.from_hamiltonian(h, ms))
    lo, hi, _, _ = init_bracket(oracle, 0, BisectionConfig(lambda_lower=0.3))
    assert lo == hi == 0.3
    r = bisect(oracle, 0, BisectionConfig(lambda_lower=0.3))
    assert r.bracket_steps == 0 and r.stopped_by == "immediate"

    cfg = BisectionConfig(lambda_lower=-2.0)
    lo, hi, _, _ = init_bracket(Oracle(toy_ev()), 0, cfg)
    assert lo == -2.0 and hi == pytest.approx(-1 / 3, abs=1e-9)
    assert lo < LAM_MINUS < hi

    h, ms = decoupled(np.diag([-0.4, 0.5]), np.diag([2.0]))
    lo, hi, _, _ = init_bracket(Oracle(EffectiveEvaluator.from_hamiltonian(h, ms)), 0, cfg)
    assert lo == -2.0 and hi == pytest.approx(-0.4, abs=1e-9)


def test_init_bracket_needs_lower_bound():
    with pytest.raises(ValidationError):
        init_bracket(Oracle(toy_ev()), 0, BisectionConfig())


def test_bisect_toy_exact():
    cfg = BisectionConfig(lambda_lower=-2.0)
    r = bisect(Oracle(toy_ev()), 0, cfg, upper=0.9)
    assert abs(r.lambda_hat - LAM_MINUS) < 1e-9
    assert r.residual <= cfg.eps_root
    tau = 4 * r.gamma**2 * cfg.eps_approx
    assert r.bracket_steps <= math.ceil(math.log2(r.initial_length / tau))


def test_bisect_flat_branch_one_evaluation():
    h, ms = decoupled(0.3, np.diag([2.0]))
    oracle = Oracle(EffectiveEvaluator.from_hamiltonian(h, ms))
    r = bisect(oracle, 0, BisectionConfig(lambda_lower=-1.0), upper=1.5)
    assert abs(r.lambda_hat - 0.3) < 1e-10
    assert r.evaluations <= 2


def test_bisect_noisy_certificate_sweep():
    ev = toy_ev()
    for seed in range(100):
        oracle = Oracle(ev, OracleConfig("noisy_bounded", 1e-3, rng_seed=seed))
        cfg = BisectionConfig(eps_root=1e-3, eps_approx=1e-3, lambda_lower=-2.0)
        r = bisect(oracle, 0, cfg, upper=0.9)
        assert abs(r.lambda_hat - LAM_MINUS) <= GAMMA2_TOY * 2e-3 + 1e-6
        assert abs(r.lambda_hat - LAM_MINUS) <= r.certificate


def test_bisect_reports_no_root():
    # branch already below the line at lambda_lower: no crossing to its right
    r = bisect(Oracle(toy_ev()), 0, BisectionConfig(lambda_lower=0.0), upper=0.9)
    assert r is None


def test_bisect_nonconvergence():
    with pytest.raises(NonConvergenceError) as info:
        bisect(Oracle(toy_ev()), 0, BisectionConfig(lambda_lower=-2.0, max_steps=3), upper=0.9)
    lo, hi = info.value.bracket
    assert lo < LAM_MINUS < hi


def test_track_branches_examples():
    rng = np.random.default_rng(0)
    u = np.linalg.qr(rng.normal(size=(4, 4)))[0]
    assert np.array_equal(track_branches(u, u), np.arange(4))
    assert np.array_equal(track_branches(u, u[:, [1, 0, 2, 3]]), [1, 0, 2, 3])


def test_detect_degenerate_examples():
    cfg = BisectionConfig(lambda_lower=-2.0)
    assert detect_degenerate(Oracle(toy_ev()), LAM_MINUS, cfg) == [0]

    h = np.zeros((4, 4))
    h[np.ix_([0, 2], [0, 2])] = TOY
    h[np.ix_([1, 3], [1, 3])] = TOY
    ev = EffectiveEvaluator.from_hamiltonian(h, ModelSpace.from_indices(4, [0, 1]))
    assert detect_degenerate(Oracle(ev), LAM_MINUS, cfg) == [0, 1]

    inst, ms, _ = engineered_instance(12, 5, 4, 0.2, seed=3)
    ev = EffectiveEvaluator.from_hamiltonian(inst.dense().h, ms)
    res = solve_window(ev, (-0.05, 0.05), cfg)
    (cluster,) = res.clusters
    lam = cluster_representative(Oracle(ev), res, cluster)
    assert len(detect_degenerate(Oracle(ev), lam, cfg, tol=1e-8)) == 4


def test_solve_window_examples():
    res = solve_window(toy_ev(), (-2, 3), BisectionConfig())
    assert np.allclose(sorted(r.lambda_hat for r in res.roots), [LAM_MINUS, LAM_PLUS], atol=1e-9)
    assert res.pole_windows and res.pole_windows[0][0] == pytest.approx(1.0)

    h11 = np.diag([-0.7, 0.2, 0.9])
    h, ms = decoupled(h11, np.diag([2.0, 2.5]))
    res = solve_window(EffectiveEvaluator.from_hamiltonian(h, ms), (-1, 0.5), BisectionConfig())
    assert np.allclose([r.lambda_hat for r in res.roots], [-0.7, 0.2], atol=1e-10)

    h, ms, ev = random_ev(10, 3, 4)
    w, v = np.linalg.eigh(h)
    weight = np.linalg.norm(ms.basis.conj().T @ v, axis=0)
    res = solve_window(ev, (-1, 1), BisectionConfig())
    assert res.roots and not res.failures
    for r in res.roots:
        assert _nearest(w, r.lambda_hat) <= r.certificate
    found = np.array([r.lambda_hat for r in res.roots])
    for lam, p in zip(w, weight):
        if p >= 0.3 and -1 < lam < 1 and _nearest(ev.chi, lam) > 1e-6:
            assert _nearest(found, lam) <= 1e-9


def test_spectrum_json_schema():
    import json
    data = json.loads(solve_window(toy_ev(), (-2, 3), BisectionConfig()).to_json())
    assert set(data) == {"roots", "clusters", "pole_windows"}
    assert set(data["roots"][0]) == {"lambda_hat", "residual", "certificate", "branch", "gamma", "steps"}


def test_roots_avoid_pole_windows():
    _, _, ev = random_ev(9, 2, 30)
    res = solve_window(ev, (-1, 1), BisectionConfig())
    for r in res.roots:
        for c, rad in res.pole_windows:
            assert abs(r.lambda_hat - c) >= rad


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_certificate_soundness(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 10))
    d = int(rng.integers(1, min(n, 4)))
    h, ms, ev = random_ev(n, d, seed)
    w = np.linalg.eigvalsh(h)
    eps = float(10.0 ** rng.uniform(-5, -3))
    oracle_cfg = OracleConfig("noisy_bounded", eps, rng_seed=seed)
    res = solve_window(ev, (-1.05, 1.05), BisectionConfig.matched(eps), oracle_cfg)
    for r in res.roots:
        assert _nearest(w, r.lambda_hat) <= r.certificate + 1e-12
        assert r.certificate <= r.gamma**2 * 2 * eps * (1 + 1e-9) or r.stopped_by != "residual"


class _Recorder(Oracle):
    def __init__(self, *a, **k):
        super().__init__(*a, **k)
        self.points = []

    def __call__(self, lam):
        self.points.append(float(lam))
        return super().__call__(lam)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_bracket_halving_and_step_count(seed):
    _, _, ev = random_ev(6, 1, seed)
    upper = ev.chi[0] - 1e-3
    cfg = BisectionConfig.matched(1e-6, lambda_lower=-1.2)
    if upper <= -1.2:
        return
    oracle = _Recorder(ev)
    r = bisect(oracle, 0, cfg, upper=upper)
    if r is None or r.bracket_steps == 0:
        return
    # replay the bracket from the recorded midpoints (after init and the probe)
    exact = Oracle(ev)
    lo, hi = cfg.lambda_lower, min(exact(cfg.lambda_lower)[0][0] + cfg.eps_approx, upper)
    widths = []
    for m in oracle.points[1:]:
        if not lo < m < hi:
            break
        widths.append(hi - lo)
        mu = exact(m)[0][0] - m
        if mu > cfg.eps_approx:
            lo = m
        elif mu < -cfg.eps_approx:
            hi = m
        else:
            break
    steps = widths[1:]
    for a, b in zip(steps, steps[1:]):
        assert b == pytest.approx(a / 2, rel=1e-9)
    limit = math.ceil(math.log2(r.initial_length / r.tau_lambda)) + 2
    assert r.bracket_steps <= max(limit, 0)


def test_failure_accounting_sampled():
    ev = toy_ev()
    theta0 = 0.05
    runs, bad, evals = 100, 0, []
    for seed in range(runs):
        cfg_o = OracleConfig("noisy_sampled", 0.02, theta=theta0, rng_seed=seed)
        r = bisect(Oracle(ev, cfg_o), 0, BisectionConfig.matched(0.02, lambda_lower=-2.0), upper=0.9)
        evals.append(r.evaluations)
        bad += abs(r.lambda_hat - LAM_MINUS) > r.certificate
    assert bad / runs <= 1.5 * max(evals) * theta0
