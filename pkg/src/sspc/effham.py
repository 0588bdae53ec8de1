"""Spectral Schur complement, energy-dependent effective Hamiltonian and eigenbranches.

With ``H22 = V diag(chi) V^H`` cached once, every resolvent-dressed quantity
reduces to the coupling matrix ``W = V^H H21`` and a diagonal weight
``r(chi - lam)``: ``r(x) = 1/x`` in exact mode, ``r = f`` (the bounded
polynomial transform) in polynomial mode.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .config import DEFAULT
from .errors import DeflationEmptyError, PoleProximityError, ValidationError
from .numerics import EigenDecomposition, opnorm
from .partition import BlockDecomposition, ModelSpace, decompose
from .polyinv import PolySpec, alpha_lambda, eval_f


class Pole(NamedTuple):
    chi: float
    multiplicity: int          # degeneracy of chi in spec(H22)
    coupling_rank: int         # number of P directions coupled to this eigenspace
    indices: tuple             # positions in the ascending H22 spectrum


@dataclass(frozen=True, eq=False)
class EffectiveEvaluator:
    """Evaluates ``S(lam)`` and ``H_eff(lam)`` for one block decomposition.

    Parameters
    ----------
    blocks : BlockDecomposition
    mode : "exact" or PolySpec
        Exact resolvent or the polynomial transform ``f``.
    pole_tolerance : float
        Exclusion radius around each ``chi`` in exact mode.
    alpha : float, optional
        Norm bound for ``H`` used by ``alpha_lambda``; defaults to ``||H||``.
    on_pole : {"raise", "pinv"}
        Inside a pole window either raise or regularize (Moore-Penrose
        pseudoinverse in exact mode, bounded ``f`` in polynomial mode).
    """

    blocks: BlockDecomposition
    mode: object = "exact"
    pole_tolerance: float = DEFAULT.pole
    alpha: float = None
    on_pole: str = "raise"
    h22_eig: EigenDecomposition = field(default=None, repr=False)

    def __post_init__(self):
        if self.pole_tolerance <= 0:
            raise ValidationError("pole_tolerance must be positive")
        if self.on_pole not in ("raise", "pinv"):
            raise ValidationError("on_pole must be 'raise' or 'pinv'")
        if not (self.mode == "exact" or isinstance(self.mode, PolySpec)):
            raise ValidationError("mode must be 'exact' or a PolySpec")
        if self.h22_eig is None:
            w, v = scipy.linalg.eigh(self.blocks.h22)
            object.__setattr__(self, "h22_eig", EigenDecomposition(np.asarray(w, float), v))
        dec = self.h22_eig
        dev = np.abs(dec.reconstruct() - self.blocks.h22).max()
        if dev > 1e-10 * max(opnorm(self.blocks.h22), 1.0):
            raise ValidationError(f"H22 eigendecomposition is inaccurate ({dev:.3e})")
        if self.alpha is None:
            object.__setattr__(self, "alpha", opnorm(self.blocks.assemble()))
        object.__setattr__(self, "_w", dec.eigenvectors.conj().T @ self.blocks.h21)
        object.__setattr__(self, "_alpha_tilde", opnorm(self.blocks.h12))

    @classmethod
    def from_hamiltonian(cls, h, ms: ModelSpace, **kwargs):
        return cls(decompose(h, ms), **kwargs)

    @property
    def d(self):
        return self.blocks.d

    @property
    def chi(self):
        return self.h22_eig.eigenvalues

    @property
    def coupling(self):
        """``W = V^H H21``; row ``k`` couples P to the ``k``-th H22 eigenvector."""
        return self._w

    @property
    def alpha_tilde(self):
        """Coupling norm ``||H12||``."""
        return self._alpha_tilde

    @property
    def is_exact(self):
        return isinstance(self.mode, str)

    def alpha_lam(self, lam):
        return alpha_lambda(max(self.alpha, 1e-300), lam)

    def window_radius(self, lam):
        """Radius of the exclusion window around each pole at energy ``lam``."""
        if self.is_exact:
            return self.pole_tolerance
        return self.alpha_lam(lam) * self.mode.delta

    def nearest_pole(self, lam):
        if self.chi.size == 0:
            return np.nan, np.inf
        k = int(np.argmin(np.abs(self.chi - lam)))
        return float(self.chi[k]), float(abs(self.chi[k] - lam))

    def in_window(self, lam):
        _, dist = self.nearest_pole(lam)
        return dist < self.window_radius(lam)

    def resolvent_weights(self, lam):
        """Diagonal ``r(chi_k - lam)`` of the resolvent in the H22 eigenbasis."""
        x = self.chi - lam
        radius = self.window_radius(lam)
        inside = np.abs(x) < radius
        if inside.any() and self.on_pole == "raise":
            chi, dist = self.nearest_pole(lam)
            raise PoleProximityError(lam, chi, dist, radius)
        if self.is_exact:
            r = np.zeros_like(x)
            ok = ~inside
            r[ok] = 1.0 / x[ok]
            return r
        return eval_f(self.mode, self.alpha_lam(lam), x)

    def resolvent(self, lam):
        """``(H22 - lam)^{-1}`` (or its pseudo-inverse / polynomial surrogate) as a matrix."""
        v = self.h22_eig.eigenvectors
        m = (v * self.resolvent_weights(lam)) @ v.conj().T
        return 0.5 * (m + m.conj().T)

    def lifted_q(self, lam, phi):
        """Q component ``-(H22 - lam)^{-1} H21 phi`` of the wave operator."""
        r = self.resolvent_weights(lam)
        return -self.h22_eig.eigenvectors @ (r[:, None] * (self._w @ phi))


def dressed(ev: EffectiveEvaluator, lam):
    """Self-energy ``H_D(lam) = -H12 (H22 - lam)^{-1} H21``."""
    r = ev.resolvent_weights(lam)
    w = ev.coupling
    hd = -(w.conj().T * r) @ w
    return 0.5 * (hd + hd.conj().T)


def h_eff(ev: EffectiveEvaluator, lam):
    """``H_eff(lam) = H11 + H_D(lam)``."""
    return ev.blocks.h11 + dressed(ev, lam)


def schur_complement(ev: EffectiveEvaluator, lam):
    """``S(lam) = H11 - lam - H12 (H22 - lam)^{-1} H21``."""
    return h_eff(ev, lam) - lam * np.eye(ev.d)


class EigenbranchSample(NamedTuple):
    lam: float
    xi: np.ndarray
    mu: np.ndarray
    vectors: np.ndarray
    slopes: np.ndarray
    overlaps: np.ndarray


def _slopes(ev, lam, vectors, r=None):
    r = ev.resolvent_weights(lam) if r is None else r
    y = r[:, None] * (ev.coupling @ vectors)
    return -np.sum(np.abs(y) ** 2, axis=0)


def branch_slope(ev: EffectiveEvaluator, lam, phi):
    """Hellmann-Feynman slope ``-||(H22 - lam)^{-1} H21 phi||^2``."""
    phi = np.asarray(phi, dtype=complex).reshape(-1)
    if abs(np.linalg.norm(phi) - 1.0) > 1e-8:
        raise ValidationError("phi must be normalized")
    return float(_slopes(ev, lam, phi[:, None])[0])


def overlap_from_slope(slope, tol=None):
    """P-space overlap ``gamma = 1/sqrt(1 - slope)``."""
    tol = DEFAULT.positive_slope if tol is None else tol
    slope = np.asarray(slope, dtype=float)
    if np.any(slope > tol):
        raise ValidationError(f"slope must be <= 0, got {slope.max():.3e}")
    g = 1.0 / np.sqrt(1.0 - np.minimum(slope, 0.0))
    return float(g) if g.ndim == 0 else g


def eigenbranches(ev: EffectiveEvaluator, lam) -> EigenbranchSample:
    r = ev.resolvent_weights(lam)
    w = ev.coupling
    heff = ev.blocks.h11 - (w.conj().T * r) @ w
    xi, vecs = scipy.linalg.eigh(0.5 * (heff + heff.conj().T))
    slopes = np.minimum(_slopes(ev, lam, vecs, r), 0.0)
    return EigenbranchSample(
        float(lam), xi, xi - lam, vecs, slopes, overlap_from_slope(slopes)
    )


def greedy_match(prev_vectors, new_vectors, prev_xi=None, new_xi=None):
    """Permutation ``perm`` with new column ``perm[i]`` continuing previous column ``i``.

    Pairs are fixed greedily in order of decreasing overlap magnitude. Equal
    overlaps prefer the closer branch value when ``xi`` arrays are given,
    then the lowest index.
    """
    prev_vectors = np.asarray(prev_vectors)
    new_vectors = np.asarray(new_vectors)
    ov = np.abs(prev_vectors.conj().T @ new_vectors)
    n = ov.shape[0]
    if prev_xi is not None and new_xi is not None:
        gap = np.abs(np.asarray(prev_xi)[:, None] - np.asarray(new_xi)[None, :])
    else:
        gap = np.zeros_like(ov)
    # round so numerically equal overlaps count as ties
    key = np.round(ov, 12)
    order = np.lexsort((np.arange(n * n), gap.ravel(), -key.ravel()))
    perm = -np.ones(n, dtype=int)
    used = np.zeros(n, dtype=bool)
    for flat in order:
        i, j = divmod(int(flat), n)
        if perm[i] < 0 and not used[j]:
            perm[i] = j
            used[j] = True
    return perm


def match_branches(prev: EigenbranchSample, new: EigenbranchSample):
    """Branch correspondence between two samples by maximal eigenvector overlap."""
    return greedy_match(prev.vectors, new.vectors, prev.xi, new.xi)


def poles(ev: EffectiveEvaluator, group_tol=None):
    """Distinct H22 eigenvalues with multiplicity and coupling rank."""
    group_tol = DEFAULT.degeneracy_group if group_tol is None else group_tol
    chi = ev.chi
    scale = max(np.abs(chi).max(initial=0.0), 1.0)
    out = []
    start = 0
    for k in range(1, len(chi) + 1):
        if k == len(chi) or chi[k] - chi[k - 1] > group_tol * scale:
            idx = tuple(range(start, k))
            _, rank, _ = _coupling_space(ev, idx)
            out.append(Pole(float(np.mean(chi[start:k])), k - start, rank, idx))
            start = k
    return out


def _coupling_space(ev, idx, rank_tol=None):
    """Eigen-decomposition of ``sum_k |H12 psi_k><H12 psi_k|`` over a pole's eigenvectors."""
    rank_tol = DEFAULT.deflation_rank if rank_tol is None else rank_tol
    wj = ev.coupling[list(idx), :]
    gram = wj.conj().T @ wj
    s, u = scipy.linalg.eigh(0.5 * (gram + gram.conj().T))
    top = s.max(initial=0.0)
    keep = s > rank_tol * top if top > 0 else np.zeros_like(s, dtype=bool)
    return s, int(keep.sum()), u[:, ~keep]


def deflated_branches(ev: EffectiveEvaluator, pole_index, lam):
    """Finite branches that survive as ``lam`` approaches pole ``pole_index``.

    Returns the eigenvalues of the regular part of ``H_eff`` (all other poles
    kept, the selected one dropped) compressed to the orthogonal complement of
    the directions coupled to the selected pole.
    """
    plist = poles(ev)
    if not 0 <= pole_index < len(plist):
        raise ValidationError(f"pole_index {pole_index} out of range ({len(plist)} poles)")
    pole = plist[pole_index]
    _, rank, comp = _coupling_space(ev, pole.indices)
    if rank == ev.d:
        raise DeflationEmptyError(
            f"pole chi={pole.chi:.6g} couples to every P direction (rank {rank})"
        )
    others = np.setdiff1d(np.arange(len(ev.chi)), pole.indices)
    x = ev.chi[others] - lam
    if np.any(np.abs(x) < ev.pole_tolerance):
        k = int(np.argmin(np.abs(x)))
        raise PoleProximityError(lam, float(ev.chi[others][k]), float(abs(x[k])), ev.pole_tolerance)
    w = ev.coupling[others, :]
    reg = ev.blocks.h11 - (w.conj().T / x) @ w
    m = comp.conj().T @ reg @ comp
    return scipy.linalg.eigvalsh(0.5 * (m + m.conj().T))


def check_overlap_separation(gamma, g, alpha_tilde, rtol=1e-10):
    """Whether ``g <= alpha_tilde * gamma / sqrt(1 - gamma^2)`` holds.

    The bound is attained for a single coupled pole, so a relative slack
    ``rtol`` absorbs rounding in ``gamma``.
    """
    if not 0 < gamma <= 1:
        raise ValidationError("gamma must lie in (0, 1]")
    if g < 0 or alpha_tilde <= 0:
        raise ValidationError("need g >= 0 and alpha_tilde > 0")
    if gamma >= 1.0:
        return True
    return bool(g <= alpha_tilde * gamma / np.sqrt(1.0 - gamma * gamma) * (1.0 + rtol))


def pole_windows(ev: EffectiveEvaluator, lam_min, lam_max):
    """Exclusion intervals ``(chi - r, chi + r)`` overlapping ``[lam_min, lam_max]``.

    In polynomial mode the radius depends on energy; the larger of the values
    at the interval ends is used so the windows are conservative.
    """
    r = max(ev.window_radius(lam_min), ev.window_radius(lam_max))
    out = []
    for chi in np.unique(ev.chi):
        lo, hi = chi - r, chi + r
        if hi > lam_min and lo < lam_max:
            if out and lo <= out[-1][1]:
                out[-1] = (out[-1][0], hi)
            else:
                out.append((float(lo), float(hi)))
    return out


__all__ = [
    "EffectiveEvaluator",
    "EigenbranchSample",
    "Pole",
    "branch_slope",
    "check_overlap_separation",
    "deflated_branches",
    "dressed",
    "eigenbranches",
    "greedy_match",
    "h_eff",
    "match_branches",
    "overlap_from_slope",
    "pole_windows",
    "poles",
    "schur_complement",
]
