"""Wave-operator lifting, residual blocks, fidelity certificates and Loewdin orthonormalization."""

import dataclasses
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .effham import EffectiveEvaluator
from .errors import GramSingularError, ValidationError
from .numerics import as_hermitian, inv_sqrt_psd, principal_angles


def _with_mode(ev: EffectiveEvaluator, mode):
    if mode is None or mode is ev.mode or (mode == "exact" and ev.is_exact):
        return ev
    return dataclasses.replace(ev, mode=mode)


def wave_operator_apply(ev: EffectiveEvaluator, lam, phi, mode=None):
    """``Omega(lam) phi = [phi; -R phi]`` in the ``(P, Q)`` frame, unnormalized.

    Returns the stacked ``d + (N - d)`` vector; :func:`lift` maps it to the
    original basis.
    """
    ev = _with_mode(ev, mode)
    phi = np.asarray(phi, dtype=complex).reshape(-1)
    if abs(np.linalg.norm(phi) - 1.0) > 1e-8:
        raise ValidationError("phi must be normalized")
    return np.concatenate([phi, ev.lifted_q(lam, phi[:, None])[:, 0]])


@dataclass
class LiftedState:
    lam: float
    psi: np.ndarray = field(repr=False)
    gamma_tilde: float
    residual_vec: np.ndarray = field(repr=False)
    residual_norm: float

    def to_dict(self):
        return {
            "lambda": self.lam,
            "gamma_tilde": self.gamma_tilde,
            "residual_norm": self.residual_norm,
            "psi_real": self.psi.real.tolist(),
            "psi_imag": self.psi.imag.tolist(),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1)


def _frame_residual(ev, lam, p_part, q_part):
    b = ev.blocks
    rp = b.h11 @ p_part + b.h12 @ q_part - lam * p_part
    rq = b.h21 @ p_part + b.h22 @ q_part - lam * q_part
    return rp, rq


def lift(ev: EffectiveEvaluator, lam, phi_hat, mode=None) -> LiftedState:
    """Normalized lift of a reduced vector and its full-space residual ``(H - lam) psi``."""
    ev = _with_mode(ev, mode)
    v = wave_operator_apply(ev, lam, phi_hat)
    d = ev.d
    nrm = np.linalg.norm(v)
    p_part, q_part = v[:d] / nrm, v[d:] / nrm
    rp, rq = _frame_residual(ev, lam, p_part, q_part)
    b = ev.blocks
    psi = b.embed(p_part, q_part)
    res = b.embed(rp, rq)
    return LiftedState(float(lam), psi, float(1.0 / nrm), res,
                       float(math.sqrt(np.linalg.norm(rp) ** 2 + np.linalg.norm(rq) ** 2)))


def residual_blocks(ev: EffectiveEvaluator, lam, ps=None):
    """``(R11, R12, cancellation_defect)`` of the rotated eigenproblem.

    ``R12 = H12 (I - f(X) X)`` and ``R11 = -R12 f(X) H21`` with ``X = H22 - lam``;
    the defect ``||R11 + H12 f(X) R21||`` vanishes up to rounding.
    """
    ev = _with_mode(ev, ps)
    b = ev.blocks
    v = ev.h22_eig.eigenvectors
    x = ev.chi - lam
    fx = ev.resolvent_weights(lam)
    r12 = (b.h12 @ v) * (1.0 - fx * x) @ v.conj().T
    f_mat = (v * fx) @ v.conj().T
    r11 = -r12 @ f_mat @ b.h21
    r21 = r12.conj().T
    defect = np.linalg.norm(r11 + b.h12 @ f_mat @ r21, 2)
    return r11, r12, float(defect)


def fidelity_certificate(lifted: LiftedState, delta_gap, reference=None):
    """Lower bound ``sqrt(1 - ||r||^2 / Delta^2)`` and, if given, the measured overlap."""
    if delta_gap <= 0:
        raise ValidationError("delta_gap must be positive")
    ratio = lifted.residual_norm / delta_gap
    if ratio >= 1.0:
        warnings.warn("residual exceeds the spectral gap; bound is vacuous", stacklevel=2)
        f_lower = 0.0
    else:
        f_lower = math.sqrt(1.0 - ratio * ratio)
    f_meas = None
    if reference is not None:
        ref = np.asarray(reference, dtype=complex).reshape(-1)
        f_meas = float(abs(np.vdot(ref / np.linalg.norm(ref), lifted.psi)))
    return f_lower, f_meas


@dataclass
class SubspaceReport:
    angles: np.ndarray
    f_min: float
    f_avg: float
    gram: np.ndarray = field(repr=False)
    gram_inv_norm: float
    external_gap: float = float("nan")
    residual_bound: float = float("nan")   # (||E|| / Delta)^2 when H is supplied

    def to_dict(self):
        return {
            "angles": [float(a) for a in self.angles],
            "f_min": self.f_min,
            "f_avg": self.f_avg,
            "gram_inv_norm": self.gram_inv_norm,
            "external_gap": self.external_gap,
            "residual_bound": self.residual_bound,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def subspace_fidelities(prepared, reference, h=None, lam=None, delta_gap=None, min_eig=1e-12):
    """Principal-angle fidelities between the prepared span and a reference span.

    ``prepared`` columns need not be orthonormal; they are replaced by
    ``B = B_tilde G^{-1/2}``. With ``h`` and ``lam`` the orthonormal residual
    ``E = (H - lam) B`` gives the bound ``1 - F_min <= (||E|| / Delta)^2``;
    ``Delta`` defaults to the distance from ``lam`` to the eigenvalues of ``h``
    outside the ``m`` nearest.
    """
    bt = np.asarray(prepared, dtype=complex)
    if bt.ndim == 1:
        bt = bt[:, None]
    ref = np.asarray(reference, dtype=complex)
    if ref.ndim == 1:
        ref = ref[:, None]
    m = bt.shape[1]
    g = bt.conj().T @ bt
    g = 0.5 * (g + g.conj().T)
    w = scipy.linalg.eigvalsh(g)
    if w.min() <= min_eig:
        raise GramSingularError("prepared columns are numerically dependent", w[w <= min_eig])
    c = inv_sqrt_psd(g)
    b = bt @ c
    angles = principal_angles(b, ref)
    cos2 = np.cos(angles) ** 2
    report = SubspaceReport(angles, float(cos2.min()), float(cos2.mean()), g, float(1.0 / w.min()))
    if h is not None and lam is not None:
        h = as_hermitian(h, name="H")
        if delta_gap is None:
            ev_h = scipy.linalg.eigvalsh(h)
            dist = np.sort(np.abs(ev_h - lam))
            delta_gap = float(dist[m]) if dist.size > m else float("inf")
        e = h @ b - lam * b
        report.external_gap = float(delta_gap)
        report.residual_bound = float((np.linalg.norm(e, 2) / delta_gap) ** 2)
    elif delta_gap is not None:
        report.external_gap = float(delta_gap)
    return report


def wave_eta(ev: EffectiveEvaluator, lam):
    """``eta`` of the wave-operator encoding: ``beta alpha_tilde / (alpha_lam delta)``.

    Exact mode substitutes ``alpha_tilde / dist(lam, spec H22)``, the same norm bound.
    """
    at = max(ev.alpha_tilde, 1e-300)
    if ev.is_exact:
        _, dist = ev.nearest_pole(lam)
        return at / max(dist, ev.pole_tolerance)
    ps = ev.mode
    return ps.beta * at / (ev.alpha_lam(lam) * ps.delta)


def wave_kappa(ev: EffectiveEvaluator, lam):
    """Normalization ``sqrt(2 + 2 eta^2)`` dividing the wave operator in its encoding."""
    eta = wave_eta(ev, lam)
    return math.sqrt(2.0 + 2.0 * eta * eta)


def lifted_columns(ev: EffectiveEvaluator, lam, phi):
    """Unnormalized ``Omega(lam) Phi`` in the ``(P, Q)`` frame."""
    phi = np.asarray(phi, dtype=complex)
    if phi.ndim == 1:
        phi = phi[:, None]
    return np.vstack([phi, ev.lifted_q(lam, phi)])


def gram(ev: EffectiveEvaluator, lam, phi):
    """``Phi^H Omega^H Omega Phi / kappa^2``."""
    a = lifted_columns(ev, lam, phi)
    g = a.conj().T @ a / wave_kappa(ev, lam) ** 2
    return 0.5 * (g + g.conj().T)


def lowdin_orthonormalize(ev: EffectiveEvaluator, lam, phi, gram_est):
    """Loewdin rotation of reduced vectors so their lifts become orthonormal.

    Returns ``(Phi0, Psi0)``: ``Phi0 = Phi C`` with unit columns,
    ``C = gram_est^{-1/2}``, and ``Psi0`` the normalized lifts in the original basis.
    """
    phi = np.asarray(phi, dtype=complex)
    if phi.ndim == 1:
        phi = phi[:, None]
    g = as_hermitian(gram_est, tol=1e-8, name="Gram estimate")
    w = scipy.linalg.eigvalsh(g)
    if w.min() <= 0:
        raise ValidationError(f"Gram estimate is not positive definite (min eigenvalue {w.min():.3e})")
    c = inv_sqrt_psd(g)
    phi0 = phi @ c
    phi0 = phi0 / np.linalg.norm(phi0, axis=0)
    a = lifted_columns(ev, lam, phi0)
    a = a / np.linalg.norm(a, axis=0)
    d = ev.d
    psi0 = ev.blocks.basis @ a[:d] + ev.blocks.complement @ a[d:]
    return phi0, psi0


def orthogonality_defect_bound(gram_exact, gram_est):
    """``2 ||G_hat - G|| ||G^{-1}||``, the reported bound on the Loewdin defect."""
    diff = np.linalg.norm(np.asarray(gram_est) - np.asarray(gram_exact), 2)
    ginv = 1.0 / scipy.linalg.eigvalsh(np.asarray(gram_exact)).min()
    return float(2.0 * diff * ginv)


__all__ = [
    "LiftedState",
    "SubspaceReport",
    "fidelity_certificate",
    "gram",
    "lift",
    "lifted_columns",
    "lowdin_orthonormalize",
    "orthogonality_defect_bound",
    "residual_blocks",
    "subspace_fidelities",
    "wave_eta",
    "wave_kappa",
    "wave_operator_apply",
]
