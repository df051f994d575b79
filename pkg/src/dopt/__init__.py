"""Distributed optimization over peer-to-peer networks of agents."""

from .agent import Agent, AgentError
from .algorithms import (
    ConstraintsConsensus,
    DualSubgradient,
    GradientTracking,
    PrimalDecomposition,
    StepSize,
    SubgradientMethod,
)
from .functions import (
    Affine,
    Constant,
    Constraint,
    Expression,
    Logistic,
    QuadraticForm,
    Scale,
    SquaredNorm,
    Sum,
    Variable,
    canonicalize,
    logistic_loss_term,
)
from .graph import Graph, from_edge_list, metropolis_weights, random_binomial
from .problem import CommonCostLocal, ConstraintCoupledLocal, CostCoupledLocal, Problem
from .runner import run_inprocess

__version__ = "0.1.0"

__all__ = [
    "Agent", "AgentError", "Graph", "from_edge_list", "random_binomial", "metropolis_weights",
    "Expression", "Variable", "Affine", "Constant", "QuadraticForm", "SquaredNorm", "Logistic", "Sum", "Scale",
    "Constraint", "canonicalize", "logistic_loss_term",
    "Problem", "CostCoupledLocal", "CommonCostLocal", "ConstraintCoupledLocal",
    "SubgradientMethod", "GradientTracking", "ConstraintsConsensus", "DualSubgradient", "PrimalDecomposition",
    "StepSize", "run_inprocess",
]
