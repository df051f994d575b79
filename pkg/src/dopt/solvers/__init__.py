"""Embedded solvers: simplex, active-set QP, projected gradient."""

from .base import (
    INFEASIBLE,
    ITERATION_LIMIT,
    OPTIMAL,
    UNBOUNDED,
    LinearProgram,
    Solution,
    SolverError,
    SolverOptions,
    StandardFormLP,
    affine_rows,
)
from .gradient import ProjectionError, Projector, box_bounds, project, projected_gradient
from .qp import active_set_qp, lexicographic_qp
from .simplex import lexicographic_solve, simplex

__all__ = [
    "INFEASIBLE", "ITERATION_LIMIT", "OPTIMAL", "UNBOUNDED",
    "LinearProgram", "StandardFormLP", "Solution", "SolverError", "SolverOptions",
    "affine_rows", "simplex", "lexicographic_solve", "active_set_qp", "lexicographic_qp",
    "projected_gradient", "project", "Projector", "box_bounds", "ProjectionError",
]
