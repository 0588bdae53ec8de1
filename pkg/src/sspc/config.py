"""Central numerical tolerances and recorded constants.

Every threshold used across the package lives here so that runs can be
reproduced by pinning a single record.
"""

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Tolerances:
    hermitian: float = 1e-12          # relative to max-abs entry
    unitary: float = 1e-10
    orthonormal: float = 1e-10
    psd_negative: float = 1e-10       # relative to ||G||
    null_column: float = 1e-8         # complement-basis QR skip threshold
    pole: float = 1e-8                # exact-mode pole tolerance
    deflation_rank: float = 1e-10     # relative to largest coupling eigenvalue
    degeneracy_group: float = 1e-8    # H0 manifold grouping, relative to ||H0||
    positive_slope: float = 1e-8
    gram_min_eig: float = 1e-12
    # Recorded constants
    poly_degree_constant: float = 3.0  # degree <= C/(1 - 1/beta) * ln(1/eps)/delta
    poly_grid_points: int = 10_000
    c_mc: float = 1.0                 # Monte Carlo budget constant
    c_qae: float = 1.0                # amplitude-estimation budget constant
    c_query: float = 1.0              # query_report prefactor
    dressed_safety: float = 3.0       # factor over O(alpha_tilde^2 eps_qsvt)
    dense_cap: int = 2048             # Hubbard dense assembly cap
    encoding_dim_cap: int = 16        # system dims for explicit encodings
    default_beta: float = 2.0

    def with_(self, **changes):
        return replace(self, **changes)


DEFAULT = Tolerances()
