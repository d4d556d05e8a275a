"""Stochastic compressible flocking hydrodynamics on a periodic torus.

A pseudo-spectral solver for the compressible Navier-Stokes system with
nonlocal attraction-repulsion and velocity-alignment forcing plus
multiplicative white noise, discretized by the layered approximation scheme
(velocity cutoff R, Galerkin dimension m, artificial viscosity eps, pressure
regularization delta), together with a verification harness that numerically
certifies the estimates the scheme's analysis rests on.
"""

from .constitutive import (
    KernelPair,
    PositivityError,
    PressureLaw,
    ViscosityParams,
    cutoff_chi,
    kernel_preset,
    velocity_truncate,
)
from .galerkin import MassOperator, MassOperatorError, galerkin_rhs, mass_lipschitz_gap
from .noise import NoiseModel, WienerPath
from .stepper import (
    GalerkinState,
    SchemeParams,
    Stepper,
    Trajectory,
    run_ensemble,
    run_path,
    run_sweep,
)
from .torus import Field, SpectralField, TorusGrid

__version__ = "0.1.0"

__all__ = [
    "Field",
    "GalerkinState",
    "KernelPair",
    "MassOperator",
    "MassOperatorError",
    "NoiseModel",
    "PositivityError",
    "PressureLaw",
    "SchemeParams",
    "SpectralField",
    "Stepper",
    "TorusGrid",
    "Trajectory",
    "ViscosityParams",
    "WienerPath",
    "cutoff_chi",
    "galerkin_rhs",
    "kernel_preset",
    "mass_lipschitz_gap",
    "run_ensemble",
    "run_path",
    "run_sweep",
    "velocity_truncate",
    "__version__",
]
