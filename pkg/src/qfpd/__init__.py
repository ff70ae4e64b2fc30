"""Fully probabilistic control of dissipative quantum systems.

Open-system models in a population-first vectorization, exact zero-order-hold
discretization, a steady-state Gaussian controller obtained from a
Riccati-like cost-to-go recursion, and seeded ensemble testing.
"""
from .config import RunConfig, load_config
from .discretize import Discretizer, discretize, exp_and_integral, matrix_exp
from .doubling import DoublingSolver
from .ensemble import (EnsembleReport, Trajectory, fidelity, run_optimization, run_testing,
                       simulate_step)
from .errors import (ConfigurationError, ConvergenceError, DimensionError, NumericalError,
                     ValidationError)
from .fpd import (ControlLaw, CostToGo, NoiseIdealSpec, control_law, gaussian_logpdf,
                  kld_gaussians, riccati_step, sample_control, steady_state)
from .lindblad import (DensityState, GeneratorPair, SystemSpec, build_generators, devectorize,
                       preset, projector_row, vectorize)

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError", "ControlLaw", "ConvergenceError", "CostToGo", "DensityState",
    "DimensionError", "Discretizer", "DoublingSolver", "EnsembleReport", "GeneratorPair",
    "NoiseIdealSpec", "NumericalError", "RunConfig", "SystemSpec", "Trajectory",
    "ValidationError", "build_generators", "control_law", "devectorize", "discretize",
    "exp_and_integral", "fidelity", "gaussian_logpdf", "kld_gaussians", "load_config",
    "matrix_exp", "preset", "projector_row", "riccati_step", "run_optimization", "run_testing",
    "sample_control", "simulate_step", "steady_state", "vectorize",
]
