"""Higher-order far-field boundary conditions for atomistic dislocation cell problems.

Modules
-------
lattice    Bravais lattices, slip-aware bond tables, energies, Hessians.
potential  Site potentials and their Cauchy-Born tensors.
predictor  Linear elastic screw and edge dislocation predictors.
greens     Continuum Green's functions and a lattice Green's function oracle.
spectral   Fourier-Legendre Galerkin solver for the higher-order predictor.
moments    Truncated force moments and continuous multipole fields.
cellsolve  Clamped cell problems, the minimiser and the two-stage algorithm.
harness    Studies, slope fits and report emission.
"""

from .cellsolve import (
    CellProblem,
    EquilibriumResult,
    SolverConfig,
    algorithm41,
    assemble_predictor,
    geometry_error,
    minimize,
)
from .greens import ContinuumGF, lattice_gf_oracle
from .lattice import BondTable, LatticeSpec, sites_in_ball
from .models import DEFAULT_MODEL, Model, build_model
from .moments import CMPField, MomentSet, truncated_moment
from .potential import CBTensors, PairPotential, TabulatedPotential
from .predictor import EdgePredictor, ScrewPredictor
from .spectral import SpectralConfig, SpectralSolution, solve_predictor

__version__ = "0.1.0"

__all__ = [
    "BondTable",
    "CBTensors",
    "CMPField",
    "CellProblem",
    "ContinuumGF",
    "DEFAULT_MODEL",
    "EdgePredictor",
    "EquilibriumResult",
    "LatticeSpec",
    "Model",
    "MomentSet",
    "PairPotential",
    "ScrewPredictor",
    "SolverConfig",
    "SpectralConfig",
    "SpectralSolution",
    "TabulatedPotential",
    "algorithm41",
    "assemble_predictor",
    "build_model",
    "geometry_error",
    "lattice_gf_oracle",
    "minimize",
    "sites_in_ball",
    "solve_predictor",
    "truncated_moment",
]
