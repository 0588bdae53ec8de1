import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sspc.effham import (EffectiveEvaluator, branch_slope, check_overlap_separation, deflated_branches,
                         eigenbranches, greedy_match, h_eff, match_branches, overlap_from_slope, poles,
                         schur_complement)
from sspc.errors import DeflationEmptyError, PoleProximityError, ValidationError

from helpers import LAM_MINUS, TOY, decoupled, random_ev, toy_ev

GAMMA_TOY = 0.850651


def _off_pole(ev, rng, lo=-1.5, hi=1.5, margin=1e-3):
    while True:
        lam = rng.uniform(lo, hi)
        if np.min(np.abs(ev.chi - lam)) > margin:
            return lam


def test_toy_schur_and_heff():
    ev = toy_ev()
    assert np.allclose(schur_complement(ev, 0.0), [[-1]])
    assert np.allclose(h_eff(ev, 0.0), [[-1]])


def test_decoupled_blocks_are_lambda_independent():
    h11 = np.array([[0.2, 0.1], [0.1, -0.4]])
    h, ms = decoupled(h11, np.diag([1.0, 2.0]))
    ev = EffectiveEvaluator.from_hamiltonian(h, ms)
    for lam in (-1.0, 0.3, 1.5):
        assert np.allclose(h_eff(ev, lam), h11)
        assert np.allclose(schur_complement(ev, lam), h11 - lam * np.eye(2))


def test_determinant_identity_example():
    h, ms, ev = random_ev(8, 2, 9)
    lam = 0.37
    hf = np.hstack([ms.basis, ev.blocks.complement])
    h22 = ev.blocks.h22
    lhs = np.linalg.det(schur_complement(ev, lam)) * np.linalg.det(h22 - lam * np.eye(6))
    rhs = np.linalg.det(h - lam * np.eye(8))
    assert abs(lhs - rhs) <= 1e-8 * abs(rhs)
    assert np.allclose(hf.conj().T @ hf, np.eye(8))


def test_fixed_points_match_dense_eigenvalues():
    h, ms, ev = random_ev(8, 2, 9)
    w, v = np.linalg.eigh(h)
    weight = np.linalg.norm(ms.basis.conj().T @ v, axis=0) ** 2
    checked = 0
    for lam, p in zip(w, weight):
        if p < 1e-6 or np.min(np.abs(ev.chi - lam)) < 1e-6:
            continue
        xi = np.linalg.eigvalsh(h_eff(ev, lam))
        assert np.min(np.abs(xi - lam)) < 1e-8
        checked += 1
    assert checked >= 2


def test_pole_proximity_error():
    ev = toy_ev()
    with pytest.raises(PoleProximityError) as info:
        h_eff(ev, 1.0 + 1e-10)
    assert info.value.chi == pytest.approx(1.0)
    assert info.value.distance == pytest.approx(1e-10, rel=1e-3)


def test_pinv_mode_drops_pole_term():
    ev = toy_ev(on_pole="pinv")
    assert np.allclose(h_eff(ev, 1.0), [[0.0]])


def test_eigenbranch_examples():
    h, ms = decoupled(1.0, np.diag([2.0, 3.0]))
    s = eigenbranches(EffectiveEvaluator.from_hamiltonian(h, ms), 0.4)
    assert np.allclose(s.xi, [1]) and np.allclose(s.slopes, [0]) and np.allclose(s.overlaps, [1])

    s = eigenbranches(toy_ev(), 0.0)
    assert np.allclose(s.xi, [-1]) and np.allclose(s.slopes, [-1])
    assert s.overlaps[0] == pytest.approx(1 / np.sqrt(2), abs=1e-5)

    s = eigenbranches(toy_ev(), LAM_MINUS)
    assert abs(s.mu[0]) < 1e-10
    assert s.overlaps[0] == pytest.approx(GAMMA_TOY, abs=1e-6)


def test_branch_slope_examples():
    h, ms = decoupled(np.diag([0.0, 0.5]), np.diag([2.0]))
    h[0, 2] = h[2, 0] = 1.0
    ev = EffectiveEvaluator.from_hamiltonian(h, ms)
    assert branch_slope(ev, 0.1, [0, 1]) == 0.0
    assert branch_slope(toy_ev(), 0.0, [1.0]) == pytest.approx(-1.0)
    with pytest.raises(ValidationError):
        branch_slope(toy_ev(), 0.0, [2.0])


def test_branch_slope_matches_finite_difference():
    _, _, ev = random_ev(10, 3, 21)
    rng = np.random.default_rng(0)
    lam, step = _off_pole(ev, rng, margin=0.05), 1e-5
    mid = eigenbranches(ev, lam)
    lo, hi = eigenbranches(ev, lam - step), eigenbranches(ev, lam + step)
    plo, phi = match_branches(mid, lo), match_branches(mid, hi)
    fd = (hi.xi[phi] - lo.xi[plo]) / (2 * step)
    assert np.abs(fd - mid.slopes).max() < 1e-6


def test_overlap_from_slope_examples():
    assert overlap_from_slope(0.0) == 1.0
    assert overlap_from_slope(-1.0) == pytest.approx(1 / np.sqrt(2))
    assert overlap_from_slope(-0.381966) == pytest.approx(GAMMA_TOY, abs=1e-6)
    with pytest.raises(ValidationError):
        overlap_from_slope(1e-3)


def test_overlap_is_p_weight_at_fixed_point():
    w, v = np.linalg.eigh(TOY)
    s = eigenbranches(toy_ev(), w[0])
    assert s.overlaps[0] == pytest.approx(abs(v[0, 0]), abs=1e-9)


def test_deflation_rank_one():
    h, ms = decoupled(np.diag([0.0, 0.3]), np.diag([2.0]))
    h[0, 2] = h[2, 0] = 1.0
    ev = EffectiveEvaluator.from_hamiltonian(h, ms)
    assert np.allclose(deflated_branches(ev, 0, 2.0 - 1e-6), [0.3])
    xi = eigenbranches(ev, 2.0 - 1e-6).xi
    assert xi[0] < -1e5 and xi[1] == pytest.approx(0.3)


def test_deflation_decoupled():
    h11 = np.diag([0.1, -0.2])
    h, ms = decoupled(h11, np.diag([1.0, 2.0]))
    ev = EffectiveEvaluator.from_hamiltonian(h, ms)
    for j in range(2):
        assert np.allclose(deflated_branches(ev, j, 1.5), [-0.2, 0.1])


def test_deflation_degenerate_pole_rank_one():
    # twofold pole chi=1 whose coupling reaches only the first Q vector
    h = np.zeros((4, 4))
    h[:2, :2] = np.diag([0.0, 0.5])
    h[2:, 2:] = np.eye(2)
    h[0, 2] = h[2, 0] = 0.7
    from sspc.partition import ModelSpace
    ev = EffectiveEvaluator.from_hamiltonian(h, ModelSpace.from_indices(4, [0, 1]))
    (pole,) = poles(ev)
    assert pole.multiplicity == 2 and pole.coupling_rank == 1
    xi = eigenbranches(ev, 1 - 1e-6).xi
    assert np.sum(xi < -1e3) == 1
    assert np.allclose(deflated_branches(ev, 0, 1 - 1e-6), [0.5])


def test_deflation_empty():
    with pytest.raises(DeflationEmptyError):
        deflated_branches(toy_ev(), 0, 0.99)


def test_overlap_separation_examples():
    assert check_overlap_separation(1 / np.sqrt(2), 0.5, 1.0)
    assert not check_overlap_separation(1 / np.sqrt(2), 1.5, 1.0)
    assert check_overlap_separation(1.0, 1e9, 1.0)
    ev = toy_ev()
    gamma = eigenbranches(ev, LAM_MINUS).overlaps[0]
    assert check_overlap_separation(gamma, abs(LAM_MINUS - 1.0), ev.alpha_tilde)


def test_greedy_match_small_rotation():
    rng = np.random.default_rng(2)
    frame = np.linalg.qr(rng.normal(size=(5, 5)))[0]
    a = rng.normal(size=(5, 5))
    k = 0.1 * (a - a.T) / np.linalg.norm(a - a.T, 2)
    from scipy.linalg import expm
    assert np.array_equal(greedy_match(frame, frame @ expm(k)), np.arange(5))


# properties

instances = st.tuples(st.integers(3, 12), st.integers(0, 2**32 - 1)).map(
    lambda t: (t[0], min(4, t[0] - 1) if t[1] % 2 else 1 + t[1] % max(1, min(4, t[0] - 1)), t[1]))


@settings(max_examples=25, deadline=None)
@given(instances)
def test_determinant_identity(args):
    n, d, seed = args
    h, ms, ev = random_ev(n, d, seed)
    rng = np.random.default_rng(seed + 1)
    for _ in range(20):
        lam = _off_pole(ev, rng)
        s1, l1 = np.linalg.slogdet(schur_complement(ev, lam))
        s2, l2 = np.linalg.slogdet(h - lam * np.eye(n))
        s3, l3 = np.linalg.slogdet(ev.blocks.h22 - lam * np.eye(n - d))
        ratio = s2 / s3 * np.exp(l2 - l3)
        assert abs(s1 * np.exp(l1) - ratio) <= 1e-8 * abs(ratio)


@settings(max_examples=25, deadline=None)
@given(instances)
def test_branches_are_monotone(args):
    n, d, seed = args
    _, _, ev = random_ev(n, d, seed)
    chi = ev.chi
    gaps = np.diff(np.concatenate([[chi[0] - 1.0], chi, [chi[-1] + 1.0]]))
    k = int(np.argmax(gaps))
    lo = (chi[k - 1] if k > 0 else chi[0] - 1.0) + 1e-3
    hi = (chi[k] if k < len(chi) else chi[-1] + 1.0) - 1e-3
    prev = eigenbranches(ev, lo)
    for lam in np.linspace(lo, hi, 40)[1:]:
        new = eigenbranches(ev, lam)
        assert np.all(new.slopes <= 1e-10)
        assert np.all((new.overlaps > 0) & (new.overlaps <= 1))
        assert np.all(new.xi <= prev.xi + 1e-10)  # sorted branches never rise
        prev = new


@settings(max_examples=25, deadline=None)
@given(st.integers(3, 10), st.integers(0, 2**32 - 1))
def test_null_space_bijection(n, seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, n))
    # planted double eigenvalue to exercise multiplicity
    w = np.sort(rng.uniform(-1, 1, n))
    w[1] = w[0]
    u = np.linalg.qr(rng.normal(size=(n, n)))[0]
    h = (u * w) @ u.T
    from sspc.partition import ModelSpace
    ev = EffectiveEvaluator.from_hamiltonian(h, ModelSpace.from_indices(n, range(d)))
    for lam in np.unique(np.round(w, 12)):
        if np.min(np.abs(ev.chi - lam)) < 1e-6:
            continue
        sv = np.linalg.svd(schur_complement(ev, lam), compute_uv=False)
        mult = int(np.sum(np.abs(w - lam) < 1e-9))
        assert np.sum(sv < 1e-8) == mult


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_trace_derivative_of_cluster(seed):
    _, _, ev = random_ev(9, 3, seed)
    rng = np.random.default_rng(seed)
    lam, step = _off_pole(ev, rng, margin=0.05), 1e-5
    s = eigenbranches(ev, lam)
    pcl = s.vectors[:, :2] @ s.vectors[:, :2].conj().T
    tr = lambda x: np.trace(pcl @ h_eff(ev, x)).real
    fd = (tr(lam + step) - tr(lam - step)) / (2 * step)
    y = ev.resolvent(lam) @ ev.blocks.h21 @ pcl
    assert abs(fd + np.linalg.norm(y, "fro") ** 2) < 1e-5


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_deflation_limits(seed):
    rng = np.random.default_rng(seed)
    n, d = 7, 3
    h = rng.normal(size=(n, n))
    h = (h + h.T) / 4
    h[d:, d:] = np.diag(np.sort(rng.uniform(-1, 1, n - d)))
    h[:d, d:] = 0
    h[0, d + 1] = h[d + 1, 0] = 0.6          # rank-1 coupling of pole 1
    h[:d, d + 2:] = rng.normal(size=(d, n - d - 2)) * 0.3
    h[d:, :d] = h[:d, d:].T
    from sspc.partition import ModelSpace
    ev = EffectiveEvaluator.from_hamiltonian(h, ModelSpace.from_indices(n, range(d)))
    j = [p.indices for p in poles(ev)].index((1,))
    chi = ev.chi[1]
    if np.min(np.abs(np.delete(ev.chi, 1) - chi)) < 0.05:
        return
    lam = chi - 1e-6
    xi = eigenbranches(ev, lam).xi
    assert xi[0] < -1e3
    assert np.abs(xi[1:] - deflated_branches(ev, j, lam)).max() < 1e-3
