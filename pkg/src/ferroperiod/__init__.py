"""Heated ferrofluid in a box: time stepping and time-periodic solutions.

The unknowns live on a 2D MAC grid: velocity on faces, temperature and the
magnetic potential at cell centres. See :mod:`ferroperiod.periodic` for the
period map and :mod:`ferroperiod.cli` for the command line.
"""
from .constitutive import ArctanLaw, LangevinLaw, PhysParams, TabulatedLaw, make_law
from .errors import (CFLError, CompatibilityError, ConfigError, ConvergenceError, FerroError,
                     MaxPrincipleError)
from .grid import Grid, VectorField
from .hydro import KelvinForceSpec, Mollifier
from .kernels import BACKEND
from .magnetostatics import MagnetostaticProblem, PotentialSolveOptions, h_map, solve_potential
from .periodic import (Forcing, PeriodicOptions, PeriodicSolveReport, State, energy, evolve,
                       evolve_period, find_periodic, gamma_constant)
from .thermal import BoundaryVariant, ZetaProfile, construct_admissible_zeta, step_temperature

__version__ = "0.1.0"

__all__ = [
    "ArctanLaw", "LangevinLaw", "TabulatedLaw", "PhysParams", "make_law",
    "CFLError", "CompatibilityError", "ConfigError", "ConvergenceError", "FerroError", "MaxPrincipleError",
    "Grid", "VectorField", "KelvinForceSpec", "Mollifier", "BACKEND",
    "MagnetostaticProblem", "PotentialSolveOptions", "h_map", "solve_potential",
    "Forcing", "PeriodicOptions", "PeriodicSolveReport", "State", "energy", "evolve", "evolve_period",
    "find_periodic", "gamma_constant",
    "BoundaryVariant", "ZetaProfile", "construct_admissible_zeta", "step_temperature",
]
