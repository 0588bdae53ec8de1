"""Ground-state energy of the 2x2 Hubbard plaquette across interaction strength.

The model space is the lowest noninteracting manifold in the
``(n_up, n_down) = (1, 1)`` sector. Bisection runs with the exact resolvent
and with the Chebyshev inverse polynomial, and both are compared to dense
diagonalization.
"""

import numpy as np
import scipy.linalg

from sspc import (BisectionConfig, EffectiveEvaluator, HubbardSpec, build_hubbard, decompose,
                  model_space_from_h0, solve_window)
from sspc.numerics import opnorm
from sspc.oracle import OracleConfig, eps_approx
from sspc.polyinv import alpha_lambda, build_inverse_poly, select_parameters

print(f"{'U':>4} {'exact diag':>14} {'exact oracle':>14} {'poly oracle':>14} {'poly rel err':>12} {'degree':>6}")
for u in np.linspace(0.0, 8.0, 5):
    inst = build_hubbard(HubbardSpec(2, 2, t=1.0, u=u, n_up=1, n_down=1))
    ms = model_space_from_h0(inst, 1)
    h = inst.h
    e0 = scipy.linalg.eigvalsh(h)[0]
    blocks = decompose(h, ms)
    chi = scipy.linalg.eigvalsh(blocks.h22)
    alpha = opnorm(h)
    lo, hi = e0 - 0.5, min(e0 + 0.5, chi.min() - 1e-3)

    exact = EffectiveEvaluator(blocks, alpha=alpha)
    r_exact = solve_window(exact, (lo, hi), BisectionConfig.matched(1e-11)).roots[0]

    g = 0.5 * float(np.min(np.abs(chi - e0)))
    delta, eps_poly = select_parameters(g, 1e-4, alpha_lambda(alpha, min(abs(lo), abs(hi))),
                                        alpha_lambda(alpha, max(abs(lo), abs(hi))))
    ps = build_inverse_poly(delta, eps_poly)
    poly = EffectiveEvaluator(blocks, mode=ps, alpha=alpha)
    bias = eps_approx(poly, OracleConfig("poly"), (lo, hi, 0.0))
    r_poly = solve_window(poly, (lo, hi), BisectionConfig(1e-11, 1e-11, eps_bias=bias)).roots[0]
    rel = abs(r_poly.lambda_hat - e0) / abs(e0)
    print(f"{u:4.1f} {e0:14.10f} {r_exact.lambda_hat:14.10f} {r_poly.lambda_hat:14.10f} {rel:12.2e} {ps.degree:6d}")
