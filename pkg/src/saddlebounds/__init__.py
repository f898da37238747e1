"""Eigenvalue bounds for block-diagonally preconditioned multiple saddle-point systems."""

from .config import DEFAULT, Tolerances
from .dsp import DspBounds, IndicatorSet, compute_indicators, dsp_bounds, pi_roots
from .errors import (
    AssumptionViolated,
    DegenerateCubic,
    DegenerateGamma,
    DimensionCap,
    NoConvergence,
    NotPositiveDefinite,
    SaddleBoundsError,
    ShapeMismatch,
    WrongBlockCount,
)
from .linalg import extremal_eigs, lanczos, minres
from .perturbation import PerturbationRange, minkowski_bounds, perturbation_report, sigma_range
from .polynomials import BoundsInterval, bounds_table, eval_U, interval_I, zeros_U_binary, zeros_U_general
from .report import ExperimentReport, RngStream, emit_report
from .system import (
    BlockTridiagonalSystem,
    SchurChain,
    assemble,
    exact_schur_chain,
    inertia,
    perturbed_matrix,
    symmetrize,
)

__version__ = "0.1.0"

__all__ = [
    "AssumptionViolated",
    "BlockTridiagonalSystem",
    "BoundsInterval",
    "DEFAULT",
    "DegenerateCubic",
    "DegenerateGamma",
    "DimensionCap",
    "DspBounds",
    "ExperimentReport",
    "IndicatorSet",
    "NoConvergence",
    "NotPositiveDefinite",
    "PerturbationRange",
    "RngStream",
    "SaddleBoundsError",
    "SchurChain",
    "ShapeMismatch",
    "Tolerances",
    "WrongBlockCount",
    "assemble",
    "bounds_table",
    "compute_indicators",
    "dsp_bounds",
    "emit_report",
    "eval_U",
    "exact_schur_chain",
    "extremal_eigs",
    "inertia",
    "interval_I",
    "lanczos",
    "minkowski_bounds",
    "minres",
    "perturbation_report",
    "perturbed_matrix",
    "pi_roots",
    "sigma_range",
    "symmetrize",
    "zeros_U_binary",
    "zeros_U_general",
    "__version__",
]
