"""Stochastic thermal quasi-geostrophic dynamics on the 2-torus.

Flux-form transport, SALT noise, an SSPRK3 integrator with smooth drift
truncation, conservation diagnostics and numerical consistency studies.
"""

from .config import ConfigError, RunConfig
from .diagnostics import CASIMIR_SET, DiagnosticsRecord, bkm_monitors, casimir, energy, pv_budget
from .elliptic import apply_K, greens_convolve, greens_function, solve_streamfunction, velocity_from_q
from .grid import Field, SpectralField, TorusSpec, VectorField, from_spectral, norms, to_spectral
from .noise import BrownianPath, ConstantMode, FourierMode, NoiseBasis, apply_G, apply_G2, refine, sample_path
from .state import State
from .stepper import ModelData, StepperConfig, Thresholds, run, ssprk3_step, theta_R
from .transport import TransportConfig, advect, assemble_drift

__version__ = "0.1.0"

__all__ = [
    "BrownianPath", "CASIMIR_SET", "ConfigError", "ConstantMode", "DiagnosticsRecord", "Field",
    "FourierMode", "ModelData", "NoiseBasis", "RunConfig", "SpectralField", "State",
    "StepperConfig", "Thresholds", "TorusSpec", "TransportConfig", "VectorField", "advect",
    "apply_G", "apply_G2", "apply_K", "assemble_drift", "bkm_monitors", "casimir", "energy",
    "from_spectral", "greens_convolve", "greens_function", "norms", "pv_budget", "refine", "run",
    "sample_path", "solve_streamfunction", "ssprk3_step", "theta_R", "to_spectral",
    "velocity_from_q",
]
