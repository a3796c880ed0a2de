"""Strain-limiting elasticity with constrained piecewise-linear spline learners."""

from .errors import (
    CalibrationError,
    DomainError,
    InfeasibleStrainError,
    ModeError,
    ParseError,
    SlekanError,
    ValidationError,
)
from .sle import SleParams, strain_from_stress, stress_from_strain, tangent_compliance
from .spline import KnotGrid, SplineMode, SplineModel, predict, project_constraints
from .training import Dataset, LossWeights, ModeTag, TrainConfig, run_synthetic, train
from .calibrate import CalibrationConfig, CalibrationResult, calibrate_sle
from .hybrid import MODERATE, STRONG, HybridModel, RegimeSpec, hybrid_predict, run_regime

__version__ = "0.1.0"
