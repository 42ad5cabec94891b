"""Random expansive measures: Bowen balls, Gamma sets and fiber entropy for random dynamical systems."""

__version__ = "0.1.0"

from .base import BaseEnvironment, BasePoint, RandomScalar, advance, eval_scalar, sample_base
from .entropy import analytic_entropy_oracle, bowen_mass_sequence, brin_katok_estimate, theorem_a_consistency
from .expansivity import (
    ExpansivityReport,
    continuum_wise_check,
    countable_diagnostic,
    expansive_diagnostic,
    implication_chain_test,
    stable_class_mass,
)
from .fiber import FiberSpace, FiberSystem, SymbolicPoint, cocycle_apply, fiber_distance
from .gamma import GammaSetApprox, bowen_membership, gamma_approx, gamma_mass
from .invariant import (
    cesaro_average,
    construct_invariant,
    gamma_pullback_identity_check,
    invariance_defect,
    pullback_disintegration,
)
from .measures import (
    CylinderSet,
    DisintegratedMeasure,
    cylinder_mass,
    measure_distance,
    pullback_measure,
    sample_fiber,
)

__all__ = [
    "BaseEnvironment", "BasePoint", "RandomScalar", "advance", "eval_scalar", "sample_base",
    "FiberSpace", "FiberSystem", "SymbolicPoint", "cocycle_apply", "fiber_distance",
    "CylinderSet", "DisintegratedMeasure", "cylinder_mass", "measure_distance", "pullback_measure",
    "sample_fiber", "GammaSetApprox", "bowen_membership", "gamma_approx", "gamma_mass",
    "ExpansivityReport", "expansive_diagnostic", "countable_diagnostic", "continuum_wise_check",
    "stable_class_mass", "implication_chain_test", "bowen_mass_sequence", "brin_katok_estimate",
    "analytic_entropy_oracle", "theorem_a_consistency", "gamma_pullback_identity_check",
    "pullback_disintegration", "cesaro_average", "invariance_defect", "construct_invariant",
]
