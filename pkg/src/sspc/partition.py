"""P/Q split of the Hilbert space and the four Hamiltonian blocks."""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .config import DEFAULT
from .errors import ValidationError
from .numerics import as_hermitian


@dataclass(frozen=True)
class ModelSpace:
    """Orthonormal N x d basis of the reference subspace.

    ``transform`` records the upper-triangular factor relating the columns
    originally supplied to the orthonormal ones: ``columns = basis @ transform``.
    """

    basis: np.ndarray
    transform: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=complex)
        if b.ndim == 1:
            b = b[:, None]
        n, d = b.shape
        if not 1 <= d < n:
            raise ValidationError(f"model space needs 1 <= d < N, got d={d}, N={n}")
        dev = np.abs(b.conj().T @ b - np.eye(d)).max()
        if dev > DEFAULT.orthonormal:
            raise ValidationError(f"basis is not orthonormal (deviation {dev:.3e})")
        object.__setattr__(self, "basis", b)
        if self.transform is None:
            object.__setattr__(self, "transform", np.eye(d, dtype=complex))

    @classmethod
    def from_columns(cls, columns):
        """Orthonormalize arbitrary independent columns with a QR factorization."""
        c = np.asarray(columns, dtype=complex)
        if c.ndim == 1:
            c = c[:, None]
        q, r = np.linalg.qr(c)
        diag = np.diag(r)
        if np.abs(diag).min() < DEFAULT.null_column * max(np.abs(diag).max(), 1.0):
            raise ValidationError("model-space columns are linearly dependent")
        # make R's diagonal positive so the result is unique
        phase = diag / np.abs(diag)
        q = q * phase
        r = phase.conj()[:, None] * r
        return cls(q, r)

    @classmethod
    def from_indices(cls, n, indices):
        basis = np.zeros((n, len(indices)), dtype=complex)
        basis[list(indices), np.arange(len(indices))] = 1.0
        return cls(basis)

    @property
    def full_dim(self):
        return self.basis.shape[0]

    @property
    def d(self):
        return self.basis.shape[1]


def projector(ms: ModelSpace):
    b = ms.basis
    return b @ b.conj().T


def complement_basis(ms: ModelSpace, threshold=None):
    """Orthonormal basis of the complement, built from projected unit vectors.

    Canonical vectors are visited in index order, projected away from the
    model space and the complement vectors found so far, and kept when the
    remainder exceeds ``threshold``. Each column's first significant entry is
    made real and positive.
    """
    threshold = DEFAULT.null_column if threshold is None else threshold
    n, d = ms.basis.shape
    need = n - d
    acc = np.zeros((n, need), dtype=complex)
    basis = ms.basis
    found = 0
    for k in range(n):
        v = np.zeros(n, dtype=complex)
        v[k] = 1.0
        for _ in range(2):
            v -= basis @ (basis.conj().T @ v)
            if found:
                q = acc[:, :found]
                v -= q @ (q.conj().T @ v)
        nv = np.linalg.norm(v)
        if nv <= threshold:
            continue
        v /= nv
        lead = np.flatnonzero(np.abs(v) > 1e-12)[0]
        v *= abs(v[lead]) / v[lead]
        acc[:, found] = v
        found += 1
        if found == need:
            break
    if found != need:
        raise ValidationError(f"complement construction found {found} of {need} vectors")
    return acc


@dataclass(frozen=True)
class BlockDecomposition:
    h11: np.ndarray
    h12: np.ndarray
    h21: np.ndarray
    h22: np.ndarray
    basis: np.ndarray
    complement: np.ndarray

    @property
    def d(self):
        return self.h11.shape[0]

    @property
    def n(self):
        return self.basis.shape[0]

    def frame(self):
        """Unitary whose columns are the P basis followed by the Q basis."""
        return np.hstack([self.basis, self.complement])

    def assemble(self):
        """Reassemble ``H`` in the original frame from the four blocks."""
        top = np.hstack([self.h11, self.h12])
        bottom = np.hstack([self.h21, self.h22])
        u = self.frame()
        return u @ np.vstack([top, bottom]) @ u.conj().T

    def embed_p(self, phi):
        return self.basis @ np.asarray(phi, dtype=complex)

    def embed(self, p_part, q_part):
        return self.basis @ p_part + self.complement @ q_part


def decompose(h, ms: ModelSpace, complement=None) -> BlockDecomposition:
    h = as_hermitian(h, name="H")
    if h.shape[0] != ms.full_dim:
        raise ValidationError(f"H has dimension {h.shape[0]} but model space lives in {ms.full_dim}")
    if complement is None:
        # canonical Gram-Schmidt is O(N^3) in Python-level steps; large N uses Householder
        bq = complement_basis(ms) if ms.full_dim <= 512 else qr_complement(ms)
    else:
        bq = np.asarray(complement, dtype=complex)
    bp = ms.basis
    hp = h @ bp
    hq = h @ bq
    h11 = bp.conj().T @ hp
    h12 = bp.conj().T @ hq
    h22 = bq.conj().T @ hq
    h11 = 0.5 * (h11 + h11.conj().T)
    h22 = 0.5 * (h22 + h22.conj().T)
    return BlockDecomposition(h11, h12, h12.conj().T.copy(), h22, bp, bq)


def qr_complement(ms: ModelSpace):
    """Householder-based complement; faster but not canonical. Used for large N."""
    n, d = ms.basis.shape
    q, _ = scipy.linalg.qr(ms.basis, mode="full")
    return q[:, d:]
