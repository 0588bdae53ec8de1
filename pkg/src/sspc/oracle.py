"""Noisy effective-Hamiltonian oracle.

Each entry of the dressed term is read out through two Hadamard-test
probabilities. The sampled mode draws binomial counts; the bounded mode adds
a deterministic worst-case style perturbation of known size instead.
"""

import math
import struct
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .config import DEFAULT
from .effham import EffectiveEvaluator, dressed
from .errors import ValidationError

MODES = ("exact", "poly", "noisy_bounded", "noisy_sampled")
ESTIMATORS = ("monte_carlo", "amplitude_estimation")
_BINOMIAL_LIMIT = 1 << 62


@dataclass(frozen=True)
class OracleConfig:
    mode: str = "exact"
    eps_est: float = 0.0
    theta: float = 0.05
    rng_seed: int = 0
    estimator: str = "monte_carlo"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"unknown oracle mode {self.mode!r}")
        if self.estimator not in ESTIMATORS:
            raise ValidationError(f"unknown estimator {self.estimator!r}")
        if not 0 < self.theta < 1:
            raise ValidationError("theta must lie in (0, 1)")
        noisy = self.mode.startswith("noisy")
        if noisy and not self.eps_est > 0:
            raise ValidationError("noisy modes need eps_est > 0")
        if not noisy and self.eps_est != 0:
            raise ValidationError("exact and poly modes need eps_est = 0")


class EstimatedEffH(NamedTuple):
    lam: float
    matrix: np.ndarray
    per_entry_error: float
    meta: dict


class Budget(NamedTuple):
    eps_entry: float
    theta_entry: float
    cost: int            # shots (Monte Carlo) or oracle queries (amplitude estimation)


def hadamard_probabilities(entry, scale):
    """Probabilities of outcome 0 for the real and imaginary Hadamard tests."""
    if scale <= 0:
        raise ValidationError("scale must be positive")
    entry = complex(entry)
    if abs(entry) > scale * (1 + 1e-12):
        raise ValidationError(f"|entry|={abs(entry):.6g} exceeds scale {scale:.6g}")
    p_re = 0.5 + entry.real / (2 * scale)
    p_im = 0.5 + entry.imag / (2 * scale)
    return min(max(p_re, 0.0), 1.0), min(max(p_im, 0.0), 1.0)


def sample_entry(entry, scale, shots, rng):
    """Monte Carlo estimate of ``entry`` from ``shots`` samples of each test."""
    if int(shots) < 1:
        raise ValidationError("shots must be a positive integer")
    shots = int(shots)
    p_re, p_im = hadamard_probabilities(entry, scale)
    if shots <= _BINOMIAL_LIMIT:
        f_re = rng.binomial(shots, p_re) / shots
        f_im = rng.binomial(shots, p_im) / shots
    else:
        # counts beyond int64 range: normal limit of the sample frequency
        z = rng.standard_normal(2)
        f_re = min(max(p_re + z[0] * math.sqrt(p_re * (1 - p_re) / shots), 0.0), 1.0)
        f_im = min(max(p_im + z[1] * math.sqrt(p_im * (1 - p_im) / shots), 0.0), 1.0)
    return complex(scale * (2 * f_re - 1), scale * (2 * f_im - 1))


def budget(eps_est, theta, d, estimator="monte_carlo", scale=1.0, c_mc=None, c_qae=None):
    """Per-entry accuracy, confidence and cost for a ``d x d`` estimate."""
    c_mc = DEFAULT.c_mc if c_mc is None else c_mc
    c_qae = DEFAULT.c_qae if c_qae is None else c_qae
    eps_entry = eps_est / d
    theta_entry = theta / d**2
    if estimator == "monte_carlo":
        half_width = eps_entry / (2 * scale)
        cost = math.ceil(c_mc * math.log(2 / theta_entry) / (2 * half_width**2))
    elif estimator == "amplitude_estimation":
        cost = math.ceil(c_qae * (scale / eps_entry) * math.log(1 / theta_entry))
    else:
        raise ValidationError(f"unknown estimator {estimator!r}")
    return Budget(eps_entry, theta_entry, cost)


def encoding_scale(ev: EffectiveEvaluator, lam):
    """Normalization of the dressed-term encoding at ``lam``.

    Polynomial mode uses ``beta alpha_tilde^2 / (alpha_lam delta)``; exact mode
    uses ``alpha_tilde^2 / dist(lam, spec H22)``, the matching norm bound.
    """
    at2 = max(ev.alpha_tilde, 1e-300) ** 2
    if ev.is_exact:
        _, dist = ev.nearest_pole(lam)
        return at2 / max(dist, ev.pole_tolerance)
    ps = ev.mode
    return ps.beta * at2 / (ev.alpha_lam(lam) * ps.delta)


def entry_rng(seed, i, j, lam):
    """Generator keyed on ``(seed, i, j, lam)`` so entries are independent and reproducible."""
    (bits,) = struct.unpack("<Q", struct.pack("<d", float(lam)))
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, i, j, bits])


def eps_approx(ev: EffectiveEvaluator, cfg: OracleConfig, lams=(0.0,)):
    """Uniform bound on ``|xi_hat - xi|`` for this oracle configuration.

    The polynomial contribution is maximized over ``lams``; pass the ends of
    the search window (``alpha_lambda`` is smallest at the point nearest 0).
    """
    eps = cfg.eps_est
    if not ev.is_exact:
        from .polyinv import eps_qsvt
        worst = max(eps_qsvt(ev.mode, ev.alpha_lam(x)) for x in lams)
        eps += DEFAULT.dressed_safety * ev.alpha_tilde**2 * worst
    return eps


def evaluate(ev: EffectiveEvaluator, lam, cfg: OracleConfig) -> EstimatedEffH:
    """Estimate ``H_eff(lam) = H11 + H_D(lam)`` under the configured noise model."""
    hd = dressed(ev, lam)
    d = ev.d
    meta = {"mode": cfg.mode}
    if cfg.mode in ("exact", "poly"):
        return EstimatedEffH(float(lam), ev.blocks.h11 + hd, 0.0, meta)
    scale = encoding_scale(ev, lam)
    b = budget(cfg.eps_est, cfg.theta, d, cfg.estimator, scale)
    meta.update(scale=scale, cost_per_entry=b.cost, estimator=cfg.estimator)
    est = np.empty((d, d), dtype=complex)
    if cfg.mode == "noisy_bounded":
        # each complex entry moves by at most eps_entry, so ||E|| <= ||E||_F <= eps_est
        amp = b.eps_entry / math.sqrt(2.0)
        for i in range(d):
            for j in range(d):
                u = entry_rng(cfg.rng_seed, i, j, lam).uniform(-amp, amp, size=2)
                est[i, j] = hd[i, j] + complex(u[0], u[1])
    else:
        if cfg.estimator != "monte_carlo":
            raise ValidationError("sampled mode simulates the Monte Carlo estimator only")
        for i in range(d):
            for j in range(d):
                est[i, j] = sample_entry(hd[i, j], scale, b.cost, entry_rng(cfg.rng_seed, i, j, lam))
    est = 0.5 * (est + est.conj().T)
    return EstimatedEffH(float(lam), ev.blocks.h11 + est, b.eps_entry, meta)


__all__ = [
    "Budget",
    "EstimatedEffH",
    "OracleConfig",
    "budget",
    "dressed",
    "encoding_scale",
    "entry_rng",
    "eps_approx",
    "evaluate",
    "hadamard_probabilities",
    "sample_entry",
]
