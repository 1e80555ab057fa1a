"""Block-preconditioned MINRES laboratory for simplified magma/mantle dynamics."""

from .mesh import BoundaryTag, Mesh, build_unit_square, build_wedge2d
from .fem import BlockSystem, DofMap, apply_dirichlet, assemble_system, taylor_hood
from .solvers import (BlockDiagPreconditioner, BlockOperator, SolverReport,
                      SparseCholesky, exact_preconditioner, minres,
                      project_constant_pressure)
from .problems import CaseConfig, CaseResult, PhysicalParams, nondimensionalize, run_case

__all__ = [
    "BoundaryTag", "Mesh", "build_unit_square", "build_wedge2d",
    "BlockSystem", "DofMap", "apply_dirichlet", "assemble_system", "taylor_hood",
    "BlockDiagPreconditioner", "BlockOperator", "SolverReport", "SparseCholesky",
    "exact_preconditioner", "minres", "project_constant_pressure",
    "CaseConfig", "CaseResult", "PhysicalParams", "nondimensionalize", "run_case",
]

__version__ = "0.1.0"
