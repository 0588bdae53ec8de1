"""Bounded odd polynomial approximations of ``1/x`` and the rescaled resolvent.

The polynomial is the Chebyshev interpolant of

    p*(x) = (delta / beta) * (1 - box(x) / box(0)) / x,
    box(x) = (erf(k (x + c)) - erf(k (x - c))) / 2,

an entire odd function that equals ``delta/(beta x)`` up to ``erfc`` tails for
``|x| >= delta`` and is damped inside the window ``(-delta, delta)``. The
series is truncated at the smallest odd degree whose discarded coefficients
sum below a quarter of the target error, then checked on a grid.
"""

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from numpy.polynomial import chebyshev as cheb
from scipy.fft import dct
from scipy.special import erf, erfcinv

from .config import DEFAULT
from .errors import ConstructionError, DomainError, ValidationError

# window center sits this fraction of the way from delta/beta to delta
_CENTER_FRACTION = 0.1


@dataclass(frozen=True, eq=False)
class PolySpec:
    delta: float
    eps_poly: float
    beta: float
    degree: int
    cheb_coeffs: np.ndarray
    sup_abs: float = float("nan")
    sup_error: float = float("nan")

    def __call__(self, x):
        return cheb.chebval(np.asarray(x, dtype=float), self.cheb_coeffs)

    def degree_budget(self, constant=None):
        constant = DEFAULT.poly_degree_constant if constant is None else constant
        return constant / (1.0 - 1.0 / self.beta) * math.log(1.0 / self.eps_poly) / self.delta

    def to_json(self):
        return json.dumps(
            {
                "delta": self.delta,
                "eps_poly": self.eps_poly,
                "beta": self.beta,
                "degree": self.degree,
                "coefficients": self.cheb_coeffs.tolist(),
                "sup_abs": self.sup_abs,
                "sup_error": self.sup_error,
            },
            indent=1,
        )

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        return cls(
            delta=float(data["delta"]),
            eps_poly=float(data["eps_poly"]),
            beta=float(data["beta"]),
            degree=int(data["degree"]),
            cheb_coeffs=np.asarray(data["coefficients"], dtype=float),
            sup_abs=float(data.get("sup_abs", "nan")),
            sup_error=float(data.get("sup_error", "nan")),
        )


def alpha_lambda(alpha, lam):
    """Normalization of the adjustable encoding of ``lam I - H22``."""
    if alpha <= 0:
        raise ValidationError("alpha must be positive")
    return math.sqrt(2.0 * (alpha * alpha + lam * lam))


def _window_target(delta, eps, beta):
    c = delta / beta + _CENTER_FRACTION * (delta - delta / beta)
    # erfc tail at |x| = delta contributes at most beta*eps/2 before the 1/beta factor
    k = float(erfcinv(0.5 * beta * eps)) / (delta - c)
    box0 = float(erf(k * c))

    def target(x):
        box = 0.5 * (erf(k * (x + c)) - erf(k * (x - c)))
        return (delta / beta) * (1.0 - box / box0) / x

    return target, k


def _cheb_coefficients(func, n):
    # first-kind Chebyshev nodes; even n keeps x = 0 off the grid
    j = np.arange(n)
    x = np.cos(np.pi * (j + 0.5) / n)
    a = dct(func(x), type=2) / n
    a[0] *= 0.5
    return a


def check_grid(ps: PolySpec, points=None):
    """Return ``(sup |p|, sup error on |x| >= delta)`` over a uniform grid plus Chebyshev nodes."""
    points = DEFAULT.poly_grid_points if points is None else points
    grid = np.linspace(-1.0, 1.0, points)
    nodes = np.cos(np.pi * (np.arange(max(ps.degree, 1) + 1) + 0.5) / (ps.degree + 1))
    x = np.concatenate([grid, nodes, [ps.delta, -ps.delta]])
    v = ps(x)
    mask = np.abs(x) >= ps.delta
    err = np.abs(v[mask] - ps.delta / (ps.beta * x[mask]))
    return float(np.abs(v).max()), float(err.max())


def build_inverse_poly(delta, eps_poly, beta=None) -> PolySpec:
    beta = DEFAULT.default_beta if beta is None else beta
    if not (0 < delta <= 0.5):
        raise ValidationError(f"delta must lie in (0, 1/2], got {delta}")
    if not (0 < eps_poly <= 0.5):
        raise ValidationError(f"eps_poly must lie in (0, 1/2], got {eps_poly}")
    if not beta > 1:
        raise ValidationError(f"beta must exceed 1, got {beta}")
    return _build_cached(float(delta), float(eps_poly), float(beta))


@lru_cache(maxsize=64)
def _build_cached(delta, eps_poly, beta):
    target, k = _window_target(delta, eps_poly, beta)
    n = 1 << int(math.ceil(math.log2(max(64.0, 12.0 * k + 64.0))))
    a = _cheb_coefficients(target, n)
    a[0::2] = 0.0
    tail = np.cumsum(np.abs(a[::-1]))[::-1]
    below = np.flatnonzero(tail < 0.25 * eps_poly)
    degree = int(below[0]) - 1 if below.size else n - 1
    degree = max(degree, 1)
    if degree % 2 == 0:
        degree += 1
    coeffs = a[: degree + 1].copy()
    coeffs.setflags(write=False)
    ps = PolySpec(delta, eps_poly, beta, degree, coeffs)
    sup_abs, sup_err = check_grid(ps)
    if sup_abs > 1.0:
        # global cap; only triggers for beta very close to 1
        coeffs = coeffs / sup_abs
        coeffs.setflags(write=False)
        ps = PolySpec(delta, eps_poly, beta, degree, coeffs)
        sup_abs, sup_err = check_grid(ps)
    if sup_err > eps_poly or sup_abs > 1.0:
        raise ConstructionError(
            f"polynomial misses its contract: sup|p|={sup_abs:.4g}, sup error={sup_err:.3e} "
            f"(target {eps_poly:.3e})"
        )
    return PolySpec(delta, eps_poly, beta, degree, coeffs, sup_abs, sup_err)


def eps_qsvt(ps: PolySpec, alpha_lam):
    """Accuracy of ``f`` against ``1/x`` outside the window ``|x| < alpha_lam * delta``."""
    return ps.beta * ps.eps_poly / (alpha_lam * ps.delta)


def eval_f(ps: PolySpec, alpha_lam, x):
    """Rescaled transform ``f(x) = beta/(alpha_lam delta) p(x / alpha_lam)``."""
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > alpha_lam * (1 + 1e-12)):
        bad = x[np.abs(x) > alpha_lam * (1 + 1e-12)]
        raise DomainError(f"|x| exceeds alpha_lambda={alpha_lam:.6g}", offending=np.atleast_1d(bad))
    return ps.beta / (alpha_lam * ps.delta) * ps(np.clip(x / alpha_lam, -1.0, 1.0))


def select_parameters(g, eps_qsvt_target, alpha_lam_min, alpha_lam_max, beta=None):
    """Pick ``(delta, eps_poly)`` so ``|f - 1/x| <= eps_qsvt_target`` at distance ``>= g``.

    One polynomial serves every energy whose ``alpha_lambda`` lies in
    ``[alpha_lam_min, alpha_lam_max]``: ``delta = g / alpha_lam_max`` keeps every
    window radius ``alpha_lambda * delta`` at most ``g``, and
    ``eps_poly = eps_qsvt * alpha_lam_min * delta / beta`` bounds the worst
    ``eps_qsvt``.
    """
    beta = DEFAULT.default_beta if beta is None else beta
    delta = min(g / alpha_lam_max, 0.5)
    eps_poly = min(eps_qsvt_target * alpha_lam_min * delta / beta, 0.5)
    return delta, eps_poly


class ResolventApprox(NamedTuple):
    matrix: np.ndarray
    window_hit: bool
    eps_qsvt: float


def apply_resolvent_approx(h22, lam, ps: PolySpec, alpha_lam, decomposition=None):
    """``f(H22 - lam I)`` by functional calculus.

    Eigenvalues of ``H22 - lam I`` inside the window are mapped to bounded
    values; ``window_hit`` reports whether that happened.
    """
    if decomposition is None:
        h22 = np.asarray(h22, dtype=complex)
        w, v = np.linalg.eigh(0.5 * (h22 + h22.conj().T))
    else:
        w, v = decomposition
    shifted = np.asarray(w, dtype=float) - lam
    if np.abs(shifted).max(initial=0.0) > alpha_lam * (1 + 1e-12):
        raise ValidationError("||H22 - lam I|| exceeds alpha_lambda")
    fw = eval_f(ps, alpha_lam, shifted)
    hit = bool(np.any(np.abs(shifted) < alpha_lam * ps.delta))
    m = (v * fw) @ v.conj().T
    return ResolventApprox(0.5 * (m + m.conj().T), hit, eps_qsvt(ps, alpha_lam))
