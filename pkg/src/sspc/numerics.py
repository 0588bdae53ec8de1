"""Dense Hermitian linear-algebra kernel.

Operators are plain complex ``numpy`` arrays; :func:`as_hermitian` is the
single gate that checks the Hermitian invariant.
"""

from typing import Callable, NamedTuple

import numpy as np
import scipy.linalg

from .config import DEFAULT
from .errors import DomainError, ValidationError


def as_hermitian(a, tol=None, name="operator"):
    """Return ``a`` as a square complex array after checking ``a = a^H``.

    The check is relative to the largest entry magnitude. The returned array
    is exactly symmetrized so downstream eigensolvers see a Hermitian input.
    """
    tol = DEFAULT.hermitian if tol is None else tol
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValidationError(f"{name} must be a non-empty square matrix, got shape {a.shape}")
    scale = max(np.abs(a).max(), 1.0)
    dev = np.abs(a - a.conj().T).max()
    if dev > tol * scale:
        raise ValidationError(f"{name} is not Hermitian: max |A - A^H| = {dev:.3e}")
    return 0.5 * (a + a.conj().T)


class EigenDecomposition(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self):
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def eigh(a) -> EigenDecomposition:
    """Ascending eigendecomposition of a Hermitian matrix.

    Degenerate eigenspaces come back in whatever orthonormal basis LAPACK
    returns; callers compare at the subspace level.
    """
    a = as_hermitian(a)
    w, v = scipy.linalg.eigh(a)
    return EigenDecomposition(np.asarray(w, dtype=float), v)


def apply_matrix_function(a, f: Callable, decomposition: EigenDecomposition | None = None):
    """Functional calculus ``V f(Lambda) V^H``.

    ``f`` is applied to the (real) eigenvalue array; if it produces
    non-finite values a :class:`DomainError` lists the offending eigenvalues.
    """
    dec = eigh(a) if decomposition is None else decomposition
    w = dec.eigenvalues
    with np.errstate(all="ignore"):
        try:
            fw = np.asarray(f(w), dtype=float)
        except (ValueError, ZeroDivisionError, ArithmeticError):
            fw = np.array([_scalar_or_nan(f, x) for x in w])
    if fw.shape != w.shape:
        fw = np.array([_scalar_or_nan(f, x) for x in w])
    bad = ~np.isfinite(fw)
    if bad.any():
        raise DomainError(
            f"function undefined at eigenvalues {w[bad].tolist()}", offending=w[bad]
        )
    v = dec.eigenvectors
    out = (v * fw) @ v.conj().T
    return 0.5 * (out + out.conj().T)


def _scalar_or_nan(f, x):
    try:
        return float(f(x))
    except (ValueError, ZeroDivisionError, ArithmeticError):
        return np.nan


def check_orthonormal(a, tol=None, name="basis"):
    tol = DEFAULT.orthonormal if tol is None else tol
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2:
        raise ValidationError(f"{name} must be a 2-D array")
    gram = a.conj().T @ a
    dev = np.abs(gram - np.eye(a.shape[1])).max() if a.shape[1] else 0.0
    if dev > tol:
        raise ValidationError(f"{name} columns are not orthonormal (deviation {dev:.3e})")
    return a


def principal_angles(a, b):
    """Principal angles between the column spans of two orthonormal bases.

    Returns ``theta`` ascending in ``[0, pi/2]``; ``cos(theta)`` are the
    singular values of ``A^H B`` clamped to ``[0, 1]``.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.ndim == 1:
        a = a[:, None]
    if b.ndim == 1:
        b = b[:, None]
    if a.shape != b.shape:
        raise ValidationError(f"basis shapes differ: {a.shape} vs {b.shape}")
    for m, name in ((a, "A"), (b, "B")):
        sv = np.linalg.svd(m, compute_uv=False)
        if sv.min() < 1e-8:
            raise ValidationError(f"{name} is rank deficient (smallest singular value {sv.min():.3e})")
        check_orthonormal(m, name=name)
    s = np.linalg.svd(a.conj().T @ b, compute_uv=False)
    s = np.clip(np.sort(s)[::-1], 0.0, 1.0)
    return np.arccos(s)


def projector(basis):
    basis = np.asarray(basis, dtype=complex)
    return basis @ basis.conj().T


def inv_sqrt_psd(g, floor=0.0):
    """Hermitian principal ``G^{-1/2}`` with eigenvalues clamped below ``floor``."""
    g = as_hermitian(g, name="Gram matrix")
    w, v = scipy.linalg.eigh(g)
    norm = max(abs(w).max(), 1e-300)
    if w.min() < -DEFAULT.psd_negative * norm:
        raise ValidationError(f"matrix is not PSD: smallest eigenvalue {w.min():.3e}")
    w = np.maximum(w, floor)
    if (w <= 0).any():
        raise ValidationError("matrix is singular; supply a positive floor")
    c = (v / np.sqrt(w)) @ v.conj().T
    return 0.5 * (c + c.conj().T)


def opnorm(a):
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))
