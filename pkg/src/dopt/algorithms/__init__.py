"""Synchronous distributed algorithms (one instance per agent)."""

from .base import Algorithm, AlgorithmError, StepSize, history_rows, read_history_csv, write_history_csv
from .constraints_consensus import ConstraintsConsensus, basis_hash, extract_basis
from .coupled import DualSubgradient, PrimalDecomposition
from .local import LocalSolver
from .subgradient import GradientTracking, SubgradientMethod

ALGORITHMS = {
    cls.name: cls
    for cls in (SubgradientMethod, GradientTracking, ConstraintsConsensus, DualSubgradient, PrimalDecomposition)
}

__all__ = [
    "Algorithm", "AlgorithmError", "StepSize", "ALGORITHMS",
    "SubgradientMethod", "GradientTracking", "ConstraintsConsensus", "DualSubgradient", "PrimalDecomposition",
    "LocalSolver", "basis_hash", "extract_basis", "history_rows", "read_history_csv", "write_history_csv",
]
