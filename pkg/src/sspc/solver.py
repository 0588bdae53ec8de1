"""Noise-aware certified bisection on eigenbranches.

On a pole-free interval ``H_eff(lam)`` decreases in the Loewner order, so
the ``i``-th smallest eigenvalue ``xi_i(lam)`` is nonincreasing and
``mu_i = xi_i - lam`` crosses zero at most once. Each sorted index is
therefore bisected independently; degenerate levels show up as several
indices landing on the same energy.
"""

import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .effham import EffectiveEvaluator, branch_slope, greedy_match, overlap_from_slope, pole_windows
from .errors import NonConvergenceError, PoleProximityError, SSPCError, ValidationError
from .oracle import OracleConfig, eps_approx as oracle_eps_approx, evaluate


@dataclass(frozen=True)
class BisectionConfig:
    eps_root: float = 1e-10
    eps_approx: float = 1e-10
    theta0: float = 0.05
    max_steps: int = 200
    lambda_lower: float = None
    eps_bias: float = 0.0    # deterministic offset (polynomial error): widens certificates, not signs

    def __post_init__(self):
        if not (self.eps_root > 0 and self.eps_approx > 0):
            raise ValidationError("eps_root and eps_approx must be positive")
        if not 0 < self.theta0 < 1:
            raise ValidationError("theta0 must lie in (0, 1)")
        if self.max_steps < 1:
            raise ValidationError("max_steps must be positive")
        if self.eps_bias < 0:
            raise ValidationError("eps_bias must be nonnegative")

    @classmethod
    def matched(cls, eps, **kw):
        """Default pairing ``eps_root = eps_approx``."""
        return cls(eps_root=eps, eps_approx=eps, **kw)


@dataclass
class RootResult:
    lambda_hat: float
    branch_index: int
    phi_hat: np.ndarray = field(repr=False)
    residual: float
    certificate: float
    bracket_steps: int
    tau_lambda: float
    gamma: float
    evaluations: int = 0
    initial_length: float = 0.0
    stopped_by: str = "residual"

    def to_dict(self):
        return {
            "lambda_hat": self.lambda_hat,
            "residual": self.residual,
            "certificate": self.certificate,
            "branch": self.branch_index,
            "gamma": self.gamma,
            "steps": self.bracket_steps,
        }


@dataclass
class SpectrumResult:
    roots: list
    clusters: list
    pole_windows: list
    failures: list = field(default_factory=list)

    def cluster_values(self):
        return [float(np.mean([self.roots[k].lambda_hat for k in c])) for c in self.clusters]

    def to_dict(self):
        return {
            "roots": [r.to_dict() for r in self.roots],
            "clusters": [list(map(int, c)) for c in self.clusters],
            "pole_windows": [[float(c), float(r)] for c, r in self.pole_windows],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


class Oracle:
    """Callable ``lam -> (xi_hat, vectors)`` wrapping an evaluator and noise model."""

    def __init__(self, ev: EffectiveEvaluator, cfg: OracleConfig = None):
        self.ev = ev
        self.cfg = OracleConfig() if cfg is None else cfg
        self.calls = 0

    def __call__(self, lam):
        self.calls += 1
        m = evaluate(self.ev, lam, self.cfg).matrix
        return scipy.linalg.eigh(0.5 * (m + m.conj().T))

    def gamma(self, lam, phi):
        """Measured overlap ``1/sqrt(1 - slope)`` at ``lam`` for reduced vector ``phi``."""
        phi = phi / np.linalg.norm(phi)
        return overlap_from_slope(min(branch_slope(self.ev, lam, phi), 0.0))


def init_bracket(oracle: Callable, branch, cfg: BisectionConfig, upper=np.inf):
    """Initial bracket ``[lam_L, xi_hat(lam_L) + eps_approx]`` for one sorted branch.

    Returns ``(lam_L, lam_U, xi_vals, vecs)``. ``lam_U == lam_L`` signals the
    immediate-acceptance case ``|xi_hat(lam_L) - lam_L| <= eps_root``.
    """
    lam_l = cfg.lambda_lower
    if lam_l is None:
        raise ValidationError("BisectionConfig.lambda_lower must be set")
    xi, vecs = oracle(lam_l)
    mu = xi[branch] - lam_l
    if abs(mu) <= cfg.eps_root:
        return lam_l, lam_l, xi, vecs
    lam_u = min(xi[branch] + cfg.eps_approx, upper)
    return lam_l, lam_u, xi, vecs


def _gamma_bound(oracle, lam, phi, radius, lo, hi):
    """Largest measured ``gamma^2`` at ``lam`` and ``lam +- radius`` clipped to ``[lo, hi]``."""
    if not isinstance(oracle, Oracle):
        return 1.0
    best = 0.0
    for x in (lam, max(lam - radius, lo), min(lam + radius, hi)):
        try:
            best = max(best, oracle.gamma(x, phi) ** 2)
        except SSPCError:
            return 1.0
    return min(best, 1.0)


def bisect(oracle: Callable, branch, cfg: BisectionConfig, upper=np.inf):
    """Certified bisection of ``mu_hat_branch`` on ``[cfg.lambda_lower, upper]``.

    Returns ``None`` when the branch has no root in the interval (the noisy
    value at an endpoint is conclusive), otherwise a :class:`RootResult`.
    """
    eps_r, eps_a = cfg.eps_root, cfg.eps_approx
    lam_l, lam_u, xi, vecs = init_bracket(oracle, branch, cfg, upper)
    evals = 1
    mu_l = xi[branch] - lam_l
    if lam_u == lam_l:
        return _accept(oracle, branch, lam_l, xi, vecs, cfg, 0, evals, 0.0, lam_l, lam_l, "immediate")
    if mu_l < -eps_a:
        return None
    if lam_u >= upper:
        lam_u = upper
        xi_u, vecs_u = oracle(lam_u)
        evals += 1
        mu_u = xi_u[branch] - lam_u
        if abs(mu_u) <= eps_r:
            return _accept(oracle, branch, lam_u, xi_u, vecs_u, cfg, 0, evals, lam_u - lam_l,
                           lam_l, lam_u, "residual")
        if mu_u > eps_a:
            return None
    else:
        # one fixed-point probe at xi_hat(lam_L); flat branches stop here
        probe = lam_u - eps_a
        if lam_l < probe < lam_u:
            xi_p, vecs_p = oracle(probe)
            evals += 1
            mu_p = xi_p[branch] - probe
            if abs(mu_p) <= eps_r:
                return _accept(oracle, branch, probe, xi_p, vecs_p, cfg, 0, evals, lam_u - lam_l,
                               lam_l, lam_u, "residual")
            if mu_p > eps_a:
                lam_l = probe
            elif mu_p < -eps_a:
                lam_u = probe
    l0 = lam_u - lam_l
    steps = 0
    perturbed = False
    while True:
        mid = 0.5 * (lam_l + lam_u)
        xi, vecs = oracle(mid)
        evals += 1
        steps += 1
        mu = xi[branch] - mid
        if abs(mu) <= eps_r:
            return _accept(oracle, branch, mid, xi, vecs, cfg, steps, evals, l0, lam_l, lam_u, "residual")
        if mu > eps_a:
            lam_l = mid
        elif mu < -eps_a:
            lam_u = mid
        elif not perturbed:
            # ambiguous midpoint: one nudge by an eighth of the bracket
            perturbed = True
            width = lam_u - lam_l
            best = (abs(mu), mid, xi, vecs)
            for shifted in (mid - width / 8, mid + width / 8):
                xs, vs = oracle(shifted)
                evals += 1
                m2 = xs[branch] - shifted
                if abs(m2) <= eps_r:
                    return _accept(oracle, branch, shifted, xs, vs, cfg, steps, evals, l0,
                                   lam_l, lam_u, "residual")
                best = min(best, (abs(m2), shifted, xs, vs), key=lambda t: t[0])
                if m2 > eps_a:
                    lam_l = shifted
                    break
                if m2 < -eps_a:
                    lam_u = shifted
                    break
            else:
                # both nudges ambiguous too: |mu| <= |mu_hat| + eps_a at the best point
                _, lam_b, xs, vs = best
                return _accept(oracle, branch, lam_b, xs, vs, cfg, steps, evals, l0, lam_l, lam_u,
                               "ambiguous")
        else:
            # second ambiguous midpoint: accept it
            return _accept(oracle, branch, mid, xi, vecs, cfg, steps, evals, l0, lam_l, lam_u, "ambiguous")
        gamma2 = _current_gamma2(oracle, mid, vecs[:, branch])
        tau = 4.0 * gamma2 * eps_a
        if lam_u - lam_l <= tau:
            mid = 0.5 * (lam_l + lam_u)
            xi, vecs = oracle(mid)
            evals += 1
            return _accept(oracle, branch, mid, xi, vecs, cfg, steps, evals, l0, lam_l, lam_u, "bracket")
        if steps >= cfg.max_steps:
            raise NonConvergenceError(
                f"branch {branch}: no convergence after {steps} steps", (lam_l, lam_u)
            )


def _current_gamma2(oracle, lam, phi):
    if isinstance(oracle, Oracle):
        try:
            return oracle.gamma(lam, phi) ** 2
        except SSPCError:
            return 1.0
    return 1.0


def _accept(oracle, branch, lam, xi, vecs, cfg, steps, evals, l0, lam_l, lam_u, how):
    phi = vecs[:, branch]
    residual = float(abs(xi[branch] - lam))
    # |mu(lam)| <= max(eps_root, |mu_hat|) + eps_approx; the max only matters for ambiguous stops
    bound = max(cfg.eps_root, residual if how == "ambiguous" else 0.0) + cfg.eps_approx + cfg.eps_bias
    gamma2 = _gamma_bound(oracle, lam, phi, bound, lam_l, lam_u if lam_u > lam_l else lam + bound)
    cert = gamma2 * bound
    if how == "bracket":
        # the root lies in the final bracket and lam is its midpoint
        cert = min(cert, 0.5 * (lam_u - lam_l)) if lam_u > lam_l else cert
    tau = 4.0 * gamma2 * cfg.eps_approx
    return RootResult(float(lam), int(branch), phi, residual, float(cert), steps, float(tau),
                      float(math.sqrt(gamma2)), evals, float(l0), how)


def track_branches(prev_vectors, new_vectors):
    """Greedy maximum-overlap permutation; ties go to the lowest index."""
    return greedy_match(prev_vectors, new_vectors)


def detect_degenerate(oracle: Callable, lambda_hat, cfg: BisectionConfig, tol=None):
    """Indices ``i`` with ``|xi_hat_i(lambda_hat) - lambda_hat| <= tol`` (default ``eps_root``)."""
    tol = cfg.eps_root if tol is None else tol
    xi, _ = oracle(lambda_hat)
    return [int(i) for i in np.flatnonzero(np.abs(xi - lambda_hat) <= tol)]


def cluster_representative(oracle: Callable, result, cluster):
    """Energy in a cluster that minimizes the largest ``|mu_hat_j|`` over its branches.

    Candidates are the members' ``lambda_hat`` and one Newton step from each,
    ``lambda_hat + gamma^2 mu_hat`` with the local Hellmann-Feynman slope.
    Degenerate branches cross at the level with different slopes, so a point
    accepted on one branch can sit outside ``eps_root`` of another.
    """
    members = [result.roots[k] for k in cluster]
    branches = sorted({r.branch_index for r in members})
    candidates = []
    for r in members:
        candidates.append(r.lambda_hat)
        xi, vecs = oracle(r.lambda_hat)
        if isinstance(oracle, Oracle):
            try:
                g2 = oracle.gamma(r.lambda_hat, vecs[:, r.branch_index]) ** 2
            except SSPCError:
                continue
            candidates.append(r.lambda_hat + g2 * (xi[r.branch_index] - r.lambda_hat))
    best, best_val = candidates[0], math.inf
    for lam in candidates:
        xi, _ = oracle(lam)
        val = float(np.max(np.abs(xi[branches] - lam)))
        if val < best_val:
            best, best_val = float(lam), val
    return best


def free_intervals(ev: EffectiveEvaluator, a, b):
    """Pole-free subintervals of ``[a, b]`` and the windows removed."""
    if not (np.isfinite(a) and np.isfinite(b)) or a >= b:
        raise ValidationError("interval must be finite with a < b")
    windows = pole_windows(ev, a, b)
    pieces = []
    lo = a
    for w_lo, w_hi in windows:
        # pad so endpoints are not rounded back into the window
        pad = 1e-6 * (w_hi - w_lo) + 4 * np.spacing(max(abs(w_lo), abs(w_hi)))
        w_lo, w_hi = w_lo - pad, w_hi + pad
        if w_lo > lo:
            pieces.append((lo, w_lo))
        lo = max(lo, w_hi)
    if lo < b:
        pieces.append((lo, b))
    return pieces, windows


def cluster_roots(roots):
    """Group roots whose certified intervals overlap."""
    order = sorted(range(len(roots)), key=lambda k: roots[k].lambda_hat)
    clusters = []
    for k in order:
        r = roots[k]
        if clusters:
            last = roots[clusters[-1][-1]]
            if r.lambda_hat - last.lambda_hat <= r.certificate + last.certificate:
                clusters[-1].append(k)
                continue
        clusters.append([k])
    return clusters


def solve_window(ev: EffectiveEvaluator, interval, cfg: BisectionConfig, oracle_cfg: OracleConfig = None):
    """All roots of every sorted branch inside ``interval``, pole windows excluded."""
    a, b = float(interval[0]), float(interval[1])
    oracle = Oracle(ev, oracle_cfg)
    pieces, windows = free_intervals(ev, a, b)
    roots, failures = [], []
    for lo, hi in pieces:
        sub = dataclasses.replace(cfg, lambda_lower=lo)
        for i in range(ev.d):
            try:
                r = bisect(oracle, i, sub, upper=hi)
            except (NonConvergenceError, PoleProximityError) as exc:
                failures.append((i, (lo, hi), str(exc)))
                continue
            if r is not None:
                roots.append(r)
    roots.sort(key=lambda r: (r.lambda_hat, r.branch_index))
    clusters = cluster_roots(roots)
    radius = [(0.5 * (lo + hi), 0.5 * (hi - lo)) for lo, hi in windows]
    return SpectrumResult(roots, clusters, radius, failures)


def default_eps_approx(ev: EffectiveEvaluator, oracle_cfg: OracleConfig):
    return oracle_eps_approx(ev, oracle_cfg)


__all__ = [
    "BisectionConfig",
    "Oracle",
    "RootResult",
    "SpectrumResult",
    "bisect",
    "cluster_representative",
    "cluster_roots",
    "detect_degenerate",
    "free_intervals",
    "init_bracket",
    "solve_window",
    "track_branches",
]
