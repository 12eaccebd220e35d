"""Guaranteed a posteriori error bounds for 1D Schrodinger problems in Hermite-Gaussian LCAO bases.

The modules follow the computation: :mod:`.gridnum` (finite-difference
and dense linear algebra), :mod:`.model` (the soft-Coulomb diatomic system),
:mod:`.lcao` (basis and Galerkin solves), :mod:`.partition` (partition of
unity and constants), :mod:`.estimator` (bounds) and :mod:`.driver`
(experiments and output).
"""
from ._backend import BACKEND
from .driver import ExperimentConfig, adaptive_refine, load_config, run_experiment
from .errors import (
    AssumptionError,
    ConfigError,
    ConvergenceError,
    DegenerateBasisError,
    GapAssumptionError,
    LcaoBoundError,
    NotCoerciveError,
    NotPSDError,
    NumericalError,
    ShapeError,
    ShiftTooSmallError,
)
from .estimator import bound_eigen, bound_source, gap_constants, partial_dual_norm
from .gridnum import Grid, SymTridiag, make_grid
from .lcao import AOBasis, assemble_galerkin, galerkin_eig_solve, galerkin_source_solve
from .model import MolecularSystem, reference_solve
from .partition import PartitionOfUnity, constant_C, constant_cA

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "ExperimentConfig", "adaptive_refine", "load_config", "run_experiment",
    "AssumptionError", "ConfigError", "ConvergenceError", "DegenerateBasisError",
    "GapAssumptionError", "LcaoBoundError", "NotCoerciveError", "NotPSDError",
    "NumericalError", "ShapeError", "ShiftTooSmallError",
    "bound_eigen", "bound_source", "gap_constants", "partial_dual_norm",
    "Grid", "SymTridiag", "make_grid",
    "AOBasis", "assemble_galerkin", "galerkin_eig_solve", "galerkin_source_solve",
    "MolecularSystem", "reference_solve",
    "PartitionOfUnity", "constant_C", "constant_cA",
]
