"""Network-based SIR model on commuter mobility networks."""

from .dynamics import EpiParams, EpiState, Trajectory, force_of_infection, integrate, rhs
from .errors import EpinetError
from .netflux import FluxMatrix, ZoneNetwork, build_flux, kernel_vector, validate_commuter

__all__ = [
    "EpiParams",
    "EpiState",
    "EpinetError",
    "FluxMatrix",
    "Trajectory",
    "ZoneNetwork",
    "build_flux",
    "force_of_infection",
    "integrate",
    "kernel_vector",
    "rhs",
    "validate_commuter",
]

__version__ = "0.1.0"
