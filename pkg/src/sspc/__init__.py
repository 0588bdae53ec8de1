"""Classical emulation of a quantum effective-Hamiltonian eigensolver.

Downfold a Hermitian ``H`` onto a model space, find the fixed points of the
energy-dependent effective Hamiltonian by certified bisection under a noisy
oracle, and lift the reduced eigenvectors back to full eigenstates.
"""

from .config import DEFAULT, Tolerances
from .effham import (
    EffectiveEvaluator,
    deflated_branches,
    dressed,
    eigenbranches,
    h_eff,
    pole_windows,
    poles,
    schur_complement,
)
from .errors import (
    BranchLostError,
    ConstructionError,
    DeflationEmptyError,
    DomainError,
    GramSingularError,
    NonConvergenceError,
    ParseError,
    PoleProximityError,
    SSPCError,
    ValidationError,
)
from .models import (
    HubbardSpec,
    ProblemInstance,
    build_hubbard,
    engineered_instance,
    model_space_from_h0,
    random_instance,
    sector_dimension,
    toy_instance,
)
from .oracle import OracleConfig, evaluate
from .partition import BlockDecomposition, ModelSpace, decompose
from .polyinv import PolySpec, build_inverse_poly, select_parameters
from .solver import BisectionConfig, Oracle, RootResult, SpectrumResult, bisect, detect_degenerate, solve_window
from .stateprep import lift, lowdin_orthonormalize, subspace_fidelities

__version__ = "0.1.0"

__all__ = [
    "BisectionConfig",
    "BlockDecomposition",
    "BranchLostError",
    "ConstructionError",
    "DEFAULT",
    "DeflationEmptyError",
    "DomainError",
    "EffectiveEvaluator",
    "GramSingularError",
    "HubbardSpec",
    "ModelSpace",
    "NonConvergenceError",
    "Oracle",
    "OracleConfig",
    "ParseError",
    "PoleProximityError",
    "PolySpec",
    "ProblemInstance",
    "RootResult",
    "SSPCError",
    "SpectrumResult",
    "Tolerances",
    "ValidationError",
    "bisect",
    "build_hubbard",
    "build_inverse_poly",
    "decompose",
    "deflated_branches",
    "detect_degenerate",
    "dressed",
    "eigenbranches",
    "engineered_instance",
    "evaluate",
    "h_eff",
    "lift",
    "lowdin_orthonormalize",
    "model_space_from_h0",
    "pole_windows",
    "poles",
    "random_instance",
    "schur_complement",
    "sector_dimension",
    "select_parameters",
    "solve_window",
    "subspace_fidelities",
    "toy_instance",
]
