import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sspc.errors import DomainError, ValidationError
from sspc.numerics import apply_matrix_function, as_hermitian, eigh, inv_sqrt_psd, principal_angles

from helpers import random_hermitian


def _charpoly_roots(a):
    # Faddeev-LeVerrier coefficients, roots from numpy's companion-matrix solver
    n = a.shape[0]
    coeffs = [1.0 + 0j]
    m = np.zeros_like(a)
    for k in range(1, n + 1):
        m = a @ m + coeffs[-1] * np.eye(n)
        coeffs.append(-np.trace(a @ m) / k)
    return np.sort(np.roots(coeffs).real)


def test_eigh_diagonal():
    dec = eigh(np.diag([3.0, 1.0, 2.0]))
    assert np.allclose(dec.eigenvalues, [1, 2, 3])


def test_eigh_pauli_x():
    assert np.allclose(eigh([[0, 1], [1, 0]]).eigenvalues, [-1, 1])


def test_eigh_matches_characteristic_polynomial():
    a = random_hermitian(8, np.random.default_rng(7))
    assert np.allclose(eigh(a).eigenvalues, _charpoly_roots(a), atol=1e-9)


def test_eigh_rejects_non_hermitian():
    with pytest.raises(ValidationError):
        eigh([[0, 1], [0, 0]])
    with pytest.raises(ValidationError):
        as_hermitian(np.zeros((0, 0)))


def test_matrix_function_examples():
    assert np.allclose(apply_matrix_function(np.diag([1.0, 4.0]), np.sqrt), np.diag([1, 2]))
    assert np.allclose(apply_matrix_function(np.eye(3), np.exp), np.e * np.eye(3))
    x = np.array([[0, 1], [1, 0]])
    assert np.allclose(apply_matrix_function(x, lambda t: t**3), x)


def test_matrix_function_domain_error():
    with pytest.raises(DomainError) as info:
        apply_matrix_function(np.diag([0.0, 2.0]), lambda t: 1 / t)
    assert info.value.offending == (0.0,)


def test_principal_angles_examples():
    e1 = np.array([[1.0], [0.0]])
    assert np.allclose(principal_angles(e1, e1), [0])
    diag = np.array([[1.0], [1.0]]) / np.sqrt(2)
    assert np.allclose(principal_angles(e1, diag), [np.pi / 4])


def test_principal_angles_projector_norm():
    rng = np.random.default_rng(3)
    a = np.linalg.qr(rng.normal(size=(12, 6)))[0]
    b = np.linalg.qr(rng.normal(size=(12, 6)))[0]
    theta = principal_angles(a, b)
    diff = a @ a.T - b @ b.T
    assert abs(np.sin(theta.max()) - np.linalg.norm(diff, 2)) < 1e-10
    assert abs(2 * np.sum(np.sin(theta) ** 2) - np.linalg.norm(diff, "fro") ** 2) < 1e-10


def test_principal_angles_rejects_bad_input():
    with pytest.raises(ValidationError):
        principal_angles(np.ones((3, 1)), np.eye(3)[:, :1])
    with pytest.raises(ValidationError):
        principal_angles(np.eye(3)[:, :1], np.eye(3)[:, :2])


def test_inv_sqrt_examples():
    assert np.allclose(inv_sqrt_psd(np.diag([4.0, 1.0])), np.diag([0.5, 1]))
    assert np.allclose(inv_sqrt_psd(np.eye(3)), np.eye(3))
    v = np.random.default_rng(11).normal(size=(6, 4))
    g = v.T @ v
    c = inv_sqrt_psd(g)
    assert np.abs(c @ g @ c - np.eye(4)).max() < 1e-8


def test_inv_sqrt_singular():
    with pytest.raises(ValidationError):
        inv_sqrt_psd(np.diag([1.0, 0.0]))
    assert np.isfinite(inv_sqrt_psd(np.diag([1.0, 0.0]), floor=1e-6)).all()


hermitians = st.integers(1, 8).flatmap(
    lambda n: st.integers(0, 2**32 - 1).map(lambda s: random_hermitian(n, np.random.default_rng(s))))


@settings(max_examples=40, deadline=None)
@given(hermitians)
def test_eigh_contract(a):
    dec = eigh(a)
    v = dec.eigenvectors
    assert np.all(np.diff(dec.eigenvalues) >= 0)
    assert np.abs(v.conj().T @ v - np.eye(len(a))).max() < 1e-10
    assert np.abs(dec.reconstruct() - a).max() < 1e-10 * max(np.linalg.norm(a, 2), 1)


@settings(max_examples=40, deadline=None)
@given(hermitians)
def test_inverse_function_times_matrix(a):
    w = np.linalg.eigvalsh(a)
    if np.min(np.abs(w)) < 1e-6:
        return
    inv = apply_matrix_function(a, lambda t: 1 / t)
    cond = np.abs(w).max() / np.abs(w).min()
    assert np.abs(inv @ a - np.eye(len(a))).max() < 1e-9 * cond


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 10), st.integers(0, 2**32 - 1))
def test_principal_angles_symmetric(n, seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, n))
    a = np.linalg.qr(rng.normal(size=(n, m)) + 1j * rng.normal(size=(n, m)))[0]
    b = np.linalg.qr(rng.normal(size=(n, m)) + 1j * rng.normal(size=(n, m)))[0]
    ta, tb = principal_angles(a, b), principal_angles(b, a)
    assert np.all((ta >= 0) & (ta <= np.pi / 2))
    assert np.abs(ta - tb).max() < 1e-7 or np.abs(np.cos(ta) - np.cos(tb)).max() < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_inv_sqrt_whitens(m, seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(m + 3, m)) + 1j * rng.normal(size=(m + 3, m))
    g = v.conj().T @ v
    c = inv_sqrt_psd(g)
    assert np.linalg.norm(c @ g @ c - np.eye(m), 2) <= 1e-8
