"""Explicit small-scale block encodings and resource estimators.

Registers are ordered ancillas first, system last, so the encoded block of
a unitary ``U`` on ``2^a * N`` dimensions is ``U[:N, :N]``. The assumed
oracles ``U_H`` and ``U_V`` are one-ancilla unitary dilations; the
polynomial stage dilates ``p`` of the adjustable block directly, which for
Hermitian arguments equals what a QSVT sequence would produce.
"""

import json
import math
from dataclasses import asdict, dataclass
import numpy as np
import scipy.linalg

from .config import DEFAULT
from .effham import EffectiveEvaluator
from .errors import ValidationError
from .numerics import opnorm
from .polyinv import PolySpec, alpha_lambda
from .stateprep import wave_eta

_X = np.array([[0, 1], [1, 0]], dtype=complex)
_HAD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)


def ry(phi):
    c, s = math.cos(phi / 2), math.sin(phi / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


@dataclass(frozen=True, eq=False)
class BlockEncoding:
    unitary: np.ndarray
    alpha: float
    ancilla_count: int
    target_dims: tuple

    def block(self):
        r, c = self.target_dims
        return self.unitary[:r, :c]

    def encoded(self):
        """``alpha`` times the top-left block."""
        return self.alpha * self.block()

    def unitarity_defect(self):
        u = self.unitary
        return float(np.abs(u.conj().T @ u - np.eye(u.shape[0])).max())

    @property
    def system_dim(self):
        return self.target_dims[0]


def dilate(a, alpha):
    """One-ancilla unitary dilation with top-left block ``a / alpha``.

    Built from the SVD ``B = U S V^H``:
    ``[[B, U C U^H], [V C V^H, -B^H]]`` with ``C = sqrt(1 - S^2)``, which is
    unitary to rounding even when ``B`` has singular values near one.
    """
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValidationError("dilate expects a square matrix")
    nrm = opnorm(a)
    if alpha <= 0 or nrm > alpha * (1 + 1e-12):
        raise ValidationError(f"alpha={alpha:.6g} is below ||A||={nrm:.6g}")
    b = a / alpha
    u, s, vh = np.linalg.svd(b)
    s = np.minimum(s, 1.0)
    c = np.sqrt(1.0 - s * s)
    v = vh.conj().T
    b = (u * s) @ vh
    top = np.hstack([b, (u * c) @ u.conj().T])
    bottom = np.hstack([(v * c) @ vh, -b.conj().T])
    return BlockEncoding(np.vstack([top, bottom]), float(alpha), 1, (n, n))


# -- register plumbing -------------------------------------------------------

def _embed(op, positions, dims):
    """Lift ``op`` acting on registers ``positions`` (in order) to the full space ``dims``."""
    k = len(dims)
    rest = [i for i in range(k) if i not in positions]
    sub_dims = [dims[i] for i in positions]
    rest_dims = [dims[i] for i in rest]
    full = np.kron(op, np.eye(int(np.prod(rest_dims)) if rest_dims else 1))
    order = list(positions) + rest
    cur_dims = sub_dims + rest_dims
    t = full.reshape(cur_dims + cur_dims)
    inv = np.argsort(order)
    t = t.transpose(list(inv) + [k + i for i in inv])
    n = int(np.prod(dims))
    return t.reshape(n, n)


def _controlled(u):
    """``|0><0| x I + |1><1| x U`` with the control as the leading qubit."""
    n = u.shape[0]
    out = np.zeros((2 * n, 2 * n), dtype=complex)
    out[:n, :n] = np.eye(n)
    out[n:, n:] = u
    return out


# -- circuit-level constructions --------------------------------------------

def projected_block_encodings(u_h: BlockEncoding, u_v: BlockEncoding, p):
    """``(U_H22, U_H12)`` built from projector-controlled NOTs on two flag qubits.

    Returned blocks are ``Q H Q / alpha`` and ``P V Q / alpha_tilde`` as full
    ``N x N`` operators.
    """
    p = np.asarray(p, dtype=complex)
    n = p.shape[0]
    if u_h.system_dim != n or u_v.system_dim != n:
        raise ValidationError("projector and encodings act on different system sizes")
    q = np.eye(n) - p
    eye2 = np.eye(2)
    c_p = np.kron(_X, p) + np.kron(eye2, q)       # flip flag on P
    c_q = np.kron(_X, q) + np.kron(eye2, p)       # flip flag on Q
    out = []
    # output flag kept at 0 selects the rows, input flag the columns:
    # (c_p, c_p) reads Q . Q, (c_q, c_p) reads P . Q
    for be, left in ((u_h, c_p), (u_v, c_q)):
        a = be.ancilla_count
        dims = [2, 2] + [2] * a + [n]
        sys_pos = len(dims) - 1
        left_op = _embed(left, [0, sys_pos], dims)
        right_op = _embed(c_p, [1, sys_pos], dims)
        core = _embed(be.unitary, list(range(2, len(dims))), dims)
        out.append(BlockEncoding(left_op @ core @ right_op, be.alpha, a + 2, (n, n)))
    return tuple(out)


def adjustable_be(u_h22: BlockEncoding, lam, alpha):
    """Encoding of ``lam I - H22`` with normalization ``alpha_lambda``."""
    n = u_h22.system_dim
    a = u_h22.ancilla_count
    phi = 2.0 * math.atan2(alpha, lam)          # cot(phi/2) = lam / alpha
    dims = [2] + [2] * a + [n]
    had = _embed(_HAD, [0], dims)
    rot = _embed(ry(phi), [0], dims)
    cu = _controlled(u_h22.unitary)
    return BlockEncoding(rot @ cu @ had, alpha_lambda(alpha, lam), a + 1, (n, n))


def _resolve(blocks_or_ev, ps):
    if isinstance(blocks_or_ev, EffectiveEvaluator):
        ev = blocks_or_ev
    else:
        ev = EffectiveEvaluator(blocks_or_ev, mode=ps, on_pole="pinv")
    if ev.blocks.n > DEFAULT.encoding_dim_cap:
        raise ValidationError(
            f"explicit encodings are limited to system dimension {DEFAULT.encoding_dim_cap}"
        )
    return ev


def oracle_encodings(ev: EffectiveEvaluator):
    """``(U_H, U_V, U_H22, U_H12, P)`` for the instance's full-space ``H`` and coupling ``V``.

    ``V = H12 + H21`` in the original basis, so ``P V Q`` is exactly ``H12``.
    """
    b = ev.blocks
    h = b.assemble()
    bp, bq = b.basis, b.complement
    p = bp @ bp.conj().T
    v = bp @ b.h12 @ bq.conj().T
    v = v + v.conj().T
    alpha = max(ev.alpha, opnorm(h))
    alpha_t = max(ev.alpha_tilde, 1e-300)
    u_h = dilate(h, alpha)
    u_v = dilate(v, max(alpha_t, opnorm(v)))
    u_h22, u_h12 = projected_block_encodings(u_h, u_v, p)
    return u_h, u_v, u_h22, u_h12, p


def _poly_stage(ev, lam, ps: PolySpec):
    """``U_p``: dilation of ``p`` applied to the adjustable block."""
    _, _, u_h22, _, _ = oracle_encodings(ev)
    adj = adjustable_be(u_h22, lam, u_h22.alpha)
    a = adj.block()
    a = 0.5 * (a + a.conj().T)
    w, v = scipy.linalg.eigh(a)
    pa = (v * ps(np.clip(w, -1.0, 1.0))) @ v.conj().T
    return dilate(pa, 1.0), adj


def dressed_be(lam, ps: PolySpec, blocks) -> BlockEncoding:
    """``U_H12 U_p U_H12^dagger`` on separate ancilla registers.

    Encodes ``-H12 f(H22 - lam) H21`` with normalization
    ``beta alpha_tilde^2 / (alpha_lam delta)``.
    """
    ev = _resolve(blocks, ps)
    _, _, _, u_h12, _ = oracle_encodings(ev)
    u_p, adj = _poly_stage(ev, lam, ps)
    n = ev.blocks.n
    a12, ap = u_h12.ancilla_count, u_p.ancilla_count
    # registers: A (second U_H12), B (U_H12^dagger), C (U_p), system
    dims = [2] * a12 + [2] * a12 + [2] * ap + [n]
    sys_pos = len(dims) - 1
    reg_a = list(range(a12))
    reg_b = list(range(a12, 2 * a12))
    reg_c = list(range(2 * a12, 2 * a12 + ap))
    first = _embed(u_h12.unitary.conj().T, reg_b + [sys_pos], dims)
    middle = _embed(u_p.unitary, reg_c + [sys_pos], dims)
    last = _embed(u_h12.unitary, reg_a + [sys_pos], dims)
    scale = ps.beta * u_h12.alpha**2 / (adj.alpha * ps.delta)
    return BlockEncoding(last @ middle @ first, scale, 2 * a12 + ap, (n, n))


def wave_be(lam, ps: PolySpec, blocks):
    """Encoding of ``Omega_tilde = I - f(H22 - lam) H21``.

    Returns ``(encoding, eta, kappa)`` with the block equal to
    ``Omega_tilde / kappa`` and ``kappa = sqrt(2 + 2 eta^2)``.
    """
    ev = _resolve(blocks, ps)
    _, _, _, u_h12, _ = oracle_encodings(ev)
    u_p, adj = _poly_stage(ev, lam, ps)
    n = ev.blocks.n
    a12, ap = u_h12.ancilla_count, u_p.ancilla_count
    dims = [2] + [2] * a12 + [2] * ap + [n]
    reg_b = list(range(1, 1 + a12))
    reg_c = list(range(1 + a12, 1 + a12 + ap))
    # controlled (U_p U_H12^dagger) on the selector
    sub_dims = dims[1:]
    sub_sys = len(sub_dims) - 1
    g1 = _embed(u_h12.unitary.conj().T, [r - 1 for r in reg_b] + [sub_sys], sub_dims)
    g2 = _embed(u_p.unitary, [r - 1 for r in reg_c] + [sub_sys], sub_dims)
    cu = _controlled(g2 @ g1)
    eta = ps.beta * u_h12.alpha / (adj.alpha * ps.delta)
    phi = -2.0 * math.atan(eta)                 # tan(phi/2) = -eta
    had = _embed(_HAD, [0], dims)
    rot = _embed(ry(phi), [0], dims)
    kappa = math.sqrt(2.0 + 2.0 * eta * eta)
    be = BlockEncoding(rot @ cu @ had, kappa, 1 + a12 + ap, (n, n))
    return be, eta, kappa


def success_probability(be: BlockEncoding, psi):
    """Probability that all ancillas read zero after applying ``be`` to ``|0>|psi>``."""
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    psi = psi / np.linalg.norm(psi)
    n = be.system_dim
    out = be.unitary[:, :n] @ psi
    return float(np.linalg.norm(out[:n]) ** 2)


def gram_be(lam, ps: PolySpec, blocks, full_circuit=False):
    """Encoding of ``G = Omega_tilde^dagger Omega_tilde / kappa^2``.

    ``full_circuit`` composes the wave-operator circuit with its adjoint on
    two ancilla registers; the ancilla space then grows as ``4^(a+1)`` and
    is only practical for the smallest systems. By default each factor is
    replaced by a one-ancilla dilation of the verified wave block.
    """
    ev = _resolve(blocks, ps)
    w, eta, kappa = wave_be(lam, ps, ev)
    n = ev.blocks.n
    if full_circuit:
        a = w.ancilla_count
        u = w.unitary
    else:
        compact = dilate(w.block(), 1.0)
        a, u = 1, compact.unitary
    dims = [2] * a + [2] * a + [n]
    sys_pos = len(dims) - 1
    first = _embed(u, list(range(a)) + [sys_pos], dims)
    second = _embed(u.conj().T, list(range(a, 2 * a)) + [sys_pos], dims)
    # block of the product is (Omega/kappa)^dagger (Omega/kappa); report G itself (alpha = 1)
    return BlockEncoding(second @ first, 1.0, 2 * a, (n, n))


def target_operators(lam, ps: PolySpec, blocks):
    """Matrix-path targets in the original basis: ``(H_D_tilde, Omega_tilde, G)``."""
    ev = _resolve(blocks, ps)
    b = ev.blocks
    v = ev.h22_eig.eigenvectors
    fx = ev.resolvent_weights(lam)
    f_full = b.complement @ ((v * fx) @ v.conj().T) @ b.complement.conj().T
    h21_full = b.complement @ b.h21 @ b.basis.conj().T
    h12_full = h21_full.conj().T
    hd = -h12_full @ f_full @ h21_full
    omega = np.eye(b.n) - f_full @ h21_full
    kappa = math.sqrt(2.0 + 2.0 * wave_eta(ev, lam) ** 2)
    return hd, omega, omega.conj().T @ omega / kappa**2


# -- resource estimators -----------------------------------------------------

@dataclass
class ResourceReport:
    queries_UH: int = 0
    queries_UV: int = 0
    ancillas: int = 0
    extra_gates: int = 0
    toffolis: int = 0
    depth_class: str = ""
    bisection_steps: int = 0

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def pcnot_resources(n, d=1, option="range_comparator"):
    """Toffoli and ancilla counts for the P-controlled NOT on ``n`` system qubits.

    ``range_comparator`` marks a contiguous computational-basis range;
    ``pattern_list`` marks ``d`` explicit bit patterns.
    """
    n, d = int(n), int(d)
    if n < 2 or d < 1:
        raise ValidationError("need n >= 2 and d >= 1")
    if option == "range_comparator":
        return ResourceReport(toffolis=4 * n - 1, ancillas=1, depth_class="O(n)")
    if option == "pattern_list":
        return ResourceReport(toffolis=2 * d * (2 * n - 3), ancillas=2, depth_class="O(d n)")
    raise ValidationError(f"unknown option {option!r}")


def basis_rotation_cost(m):
    """Worst-case number of two-mode Givens rotations for an ``m``-mode rotation."""
    if int(m) < 1:
        raise ValidationError("m must be positive")
    m = int(m)
    return m * (m - 1) // 2


def query_report(alpha, alpha_tilde, d, g, eps_est, eps_qsvt, theta, gamma, l0,
                 estimator="amplitude_estimation", a=1, a_tilde=1, n_qubits=1, c_query=None):
    """Query counts for a full certified bisection.

    Per oracle evaluation (all ``d^2`` entries), with ``c = c_query``:
      amplitude estimation: ``U_H``: c alpha alpha_t^2 d^3 / (g^2 eps_est) ln(1/(g eps_qsvt)) ln(d/theta),
                            ``U_V``: c alpha_t^2 d^3 / (g eps_est) ln(d/theta);
      Monte Carlo:          ``U_H``: c alpha alpha_t^4 d^4 / (g^3 eps_est^2) ln(1/(g eps_qsvt)) ln(d/theta),
                            ``U_V``: c alpha_t^4 d^4 / (g^2 eps_est^2) ln(d/theta).
    The totals multiply by ``T = ceil(log2(L0 / (4 gamma^2 eps_approx)))`` with
    ``eps_approx = eps_est + 3 alpha_t^2 eps_qsvt``.
    """
    for name, val in (("alpha", alpha), ("alpha_tilde", alpha_tilde), ("g", g),
                      ("eps_est", eps_est), ("eps_qsvt", eps_qsvt), ("gamma", gamma), ("l0", l0)):
        if not val > 0:
            raise ValidationError(f"{name} must be positive")
    if not 0 < theta < 1 or int(d) < 1:
        raise ValidationError("need 0 < theta < 1 and d >= 1")
    c = DEFAULT.c_query if c_query is None else c_query
    log_poly = math.log(max(1.0 / (g * eps_qsvt), math.e))
    log_conf = math.log(max(d / theta, math.e))
    if estimator == "amplitude_estimation":
        per_h = c * alpha * alpha_tilde**2 * d**3 / (g**2 * eps_est) * log_poly * log_conf
        per_v = c * alpha_tilde**2 * d**3 / (g * eps_est) * log_conf
        ancillas = a + 2 * a_tilde + 10
    elif estimator == "monte_carlo":
        per_h = c * alpha * alpha_tilde**4 * d**4 / (g**3 * eps_est**2) * log_poly * log_conf
        per_v = c * alpha_tilde**4 * d**4 / (g**2 * eps_est**2) * log_conf
        ancillas = a + 2 * a_tilde + 9
    else:
        raise ValidationError(f"unknown estimator {estimator!r}")
    eps_approx = eps_est + DEFAULT.dressed_safety * alpha_tilde**2 * eps_qsvt
    steps = max(1, math.ceil(math.log2(max(l0 / (4 * gamma**2 * eps_approx), 1.0))))
    gates = c * alpha * (a + a_tilde + n_qubits) / g * log_poly
    return ResourceReport(
        queries_UH=math.ceil(per_h * steps),
        queries_UV=math.ceil(per_v * steps),
        ancillas=ancillas,
        extra_gates=math.ceil(gates),
        bisection_steps=steps,
    )


__all__ = [
    "BlockEncoding",
    "ResourceReport",
    "adjustable_be",
    "basis_rotation_cost",
    "dilate",
    "dressed_be",
    "gram_be",
    "oracle_encodings",
    "pcnot_resources",
    "projected_block_encodings",
    "query_report",
    "success_probability",
    "target_operators",
    "wave_be",
]
