"""Particle simulation and propagation-of-chaos diagnostics for mean-field SDEs."""

__version__ = "0.1.0"

from .chaos import ChaosReport, decoupled_error, fit_decay, phi_rate, run_chaos_sweep, splitting_error
from .config import ExperimentConfig, parse_config
from .integrator import (
    BlowUpError,
    Ensemble,
    Normal,
    PointMass,
    SchemeConfig,
    integrate,
    integrate_frozen_measure,
    sample_initial,
    step_particle_system,
)
from .measure import EmpiricalMeasure, coupling_bound, wasserstein_1d
from .model import CoefficientModel, GrowthMeta, build_model, example61, linear_mean_field, mean_square
from .rng import BrownianDriver

__all__ = [
    "BlowUpError", "BrownianDriver", "ChaosReport", "CoefficientModel", "EmpiricalMeasure", "Ensemble",
    "ExperimentConfig", "GrowthMeta", "Normal", "PointMass", "SchemeConfig", "build_model", "coupling_bound",
    "decoupled_error", "example61", "fit_decay", "integrate", "integrate_frozen_measure", "linear_mean_field",
    "mean_square", "parse_config", "phi_rate", "run_chaos_sweep", "sample_initial", "splitting_error",
    "step_particle_system", "wasserstein_1d",
]
