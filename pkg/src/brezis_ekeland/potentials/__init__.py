"""Scalar convex-analysis engine for the diffusion potentials."""

from .core import (
    FAMILIES, CoefficientField, PotentialSpec, RegularizedPotential, ScalarGraphValue,
    conjugate_reg, eval_beta, eval_j, eval_j_reg, eval_j_star, moreau_j, numeric_j_star,
    resolvent, yosida_beta,
)
from .checks import (
    AffineMinorant, CoercivityReport, FenchelYoungReport, SymmetryCert, affine_minorant,
    check_coercivity, check_fenchel_young, check_symmetry,
)

__all__ = [
    "FAMILIES", "CoefficientField", "PotentialSpec", "RegularizedPotential", "ScalarGraphValue",
    "conjugate_reg", "eval_beta", "eval_j", "eval_j_reg", "eval_j_star", "moreau_j",
    "numeric_j_star", "resolvent", "yosida_beta",
    "AffineMinorant", "CoercivityReport", "FenchelYoungReport", "SymmetryCert",
    "affine_minorant", "check_coercivity", "check_fenchel_young", "check_symmetry",
]
