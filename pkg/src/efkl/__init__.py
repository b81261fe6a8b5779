"""Variational solvers for the extended Fisher-Kolmogorov equation.

Minimal heteroclinics of the fourth-order ODE, separation certificates for
two families of planar heteroclinics, and double-layer solutions of the PDE.
"""

from .config import RunConfig, load_config
from .errors import (DomainTooShortError, EFKError, FormatError, InvalidParameterError,
                     SeparationNotFound, SolverFailure, UnclassifiableError)
from .families import HeteroclinicFamily, SeparationCertificate, certify, find_families
from .ode1d import Grid1D, MinimalHeteroclinic, Profile1D, action_1d, minimize_heteroclinic
from .pde2d import Field2D, Grid2D, Operator, energy_2d, minimize_double_layer
from .potentials import allen_cahn, by_name, ginzburg_landau, verify_double_well, w_eps

__version__ = "0.1.0"

__all__ = [
    "RunConfig", "load_config",
    "EFKError", "InvalidParameterError", "SolverFailure", "DomainTooShortError",
    "UnclassifiableError", "SeparationNotFound", "FormatError",
    "HeteroclinicFamily", "SeparationCertificate", "certify", "find_families",
    "Grid1D", "Profile1D", "MinimalHeteroclinic", "action_1d", "minimize_heteroclinic",
    "Grid2D", "Field2D", "Operator", "energy_2d", "minimize_double_layer",
    "allen_cahn", "ginzburg_landau", "w_eps", "by_name", "verify_double_well",
]
