"""Two-level toy: downfold, bisect on the fixed-point equation, lift.

``H = [[0, 1], [1, 1]]`` with P the first basis vector gives
``xi(lam) = 1 / (lam - 1)``, whose fixed points are the golden-ratio pair.
"""

import numpy as np
import scipy.linalg

from sspc import BisectionConfig, EffectiveEvaluator, decompose, lift, solve_window, toy_instance
from sspc.effham import eigenbranches
from sspc.stateprep import fidelity_certificate

inst, ms = toy_instance()
h = inst.h
print("H =\n", h.real)
print("exact eigenvalues:", scipy.linalg.eigvalsh(h))

ev = EffectiveEvaluator(decompose(h, ms), alpha=inst.alpha)
print("pole of the effective Hamiltonian:", ev.chi)

# a few values of the scalar branch
for lam in (-1.0, -0.5, 0.0, 0.5):
    b = eigenbranches(ev, lam)
    print(f"lam={lam:+.2f}  xi={b.xi[0]:+.6f}  gamma={b.overlaps[0]:.4f}  1/(lam-1)={1 / (lam - 1):+.6f}")

res = solve_window(ev, (-2.0, 3.0), BisectionConfig.matched(1e-12))
w, v = scipy.linalg.eigh(h)
for r in res.roots:
    state = lift(ev, r.lambda_hat, r.phi_hat)
    k = int(np.argmin(np.abs(w - r.lambda_hat)))
    f_lower, f_meas = fidelity_certificate(state, np.min(np.abs(np.delete(w, k) - r.lambda_hat)), v[:, k])
    print(f"root {r.lambda_hat:+.12f}  residual {r.residual:.1e}  steps {r.bracket_steps}  "
          f"fidelity >= {f_lower:.12f} (measured {f_meas:.12f})")
print("golden ratio pair:", (1 - np.sqrt(5)) / 2, (1 + np.sqrt(5)) / 2)
print("pole windows skipped:", res.pole_windows)
