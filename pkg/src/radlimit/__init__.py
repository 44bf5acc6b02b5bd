"""Radiative compressible Euler in the diffusive scaling, its limit system and a convergence harness."""

__version__ = "0.1.0"

from .angular import AngularQuadrature, build_quadrature, default_quadrature, moment0, moment1, moment2
from .coupled import CoupledState, InvariantLedger, invariants, run_simulation, step_coupled
from .errors import (
    CFLViolation,
    ConfigurationError,
    ContractViolation,
    DomainError,
    NumericFailure,
    RadLimitError,
    StateValidityError,
)
from .euler import ConservativeState, RadiativeSources, planck, rusanov_flux_step
from .limit import InitialLayer, LimitState, initial_layer_eval, limit_step, remainder_diagnostic, run_limit
from .mesh import FluidState, KineticField, PeriodicGrid
from .transport import EpsilonParams, imex_step, picard_solve

__all__ = [
    "AngularQuadrature",
    "build_quadrature",
    "default_quadrature",
    "moment0",
    "moment1",
    "moment2",
    "CoupledState",
    "InvariantLedger",
    "invariants",
    "run_simulation",
    "step_coupled",
    "CFLViolation",
    "ConfigurationError",
    "ContractViolation",
    "DomainError",
    "NumericFailure",
    "RadLimitError",
    "StateValidityError",
    "ConservativeState",
    "RadiativeSources",
    "planck",
    "rusanov_flux_step",
    "InitialLayer",
    "LimitState",
    "initial_layer_eval",
    "limit_step",
    "remainder_diagnostic",
    "run_limit",
    "FluidState",
    "KineticField",
    "PeriodicGrid",
    "EpsilonParams",
    "imex_step",
    "picard_solve",
]
