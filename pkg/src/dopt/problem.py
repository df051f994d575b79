"""
Local problem data and the local ``solve`` dispatcher.

``Problem.solve`` picks a solver from the structure of the data:

* affine objective, affine constraints  -> simplex (LP)
* quadratic objective, affine constraints -> active-set QP
* other smooth objective, affine constraints -> projected gradient
* convex nonlinear constraints -> augmented Lagrangian around projected gradient
"""

from dataclasses import dataclass, field

import numpy as np

from .functions import Affine, Constraint, Expression, ExpressionError
from .solvers import (
    INFEASIBLE,
    OPTIMAL,
    LinearProgram,
    Solution,
    SolverOptions,
    active_set_qp,
    affine_rows,
    lexicographic_qp,
    lexicographic_solve,
    project as _project,
    projected_gradient,
    simplex,
)
from .solvers.base import constraint_duals

LP_FEASIBILITY_TOL = 1e-9
CONVEX_FEASIBILITY_TOL = 1e-8


class Problem:
    """An objective plus a list of constraints over one variable."""

    def __init__(self, objective, constraints=()):
        if not isinstance(objective, Expression):
            raise ExpressionError("objective must be an Expression")
        if objective.output_dim != 1:
            raise ExpressionError("objective must be scalar, has output dimension {}".format(objective.output_dim))
        constraints = list(constraints)
        for c in constraints:
            if not isinstance(c, Constraint):
                raise ExpressionError("constraints must be Constraint objects, got {!r}".format(c))
            if c.input_dim != objective.input_dim:
                raise ExpressionError("constraint dimension {} does not match objective dimension {}".format(
                    c.input_dim, objective.input_dim))
            c.canonical()  # rejects nonconvex forms early
        self.objective = objective
        self.constraints = constraints

    @property
    def dim(self):
        return self.objective.input_dim

    def max_violation(self, x):
        if not self.constraints:
            return -np.inf
        return max(c.max_violation(x) for c in self.constraints)

    def solve(self, opts=None):
        opts = opts or SolverOptions()
        if all(c.is_affine for c in self.constraints):
            if self.objective.is_affine:
                return self._solve_lp(opts)
            quad = self.objective.quadratic_coefficients()
            if quad is not None:
                return self._solve_qp(quad, opts)
            return projected_gradient(self.objective, self.constraints, _convex_opts(opts))
        return _augmented_lagrangian(self, _convex_opts(opts))

    def _solve_lp(self, opts):
        A_ub, b_ub, A_eq, b_eq, row_map = affine_rows(self.constraints, self.dim)
        n = self.dim
        lp = LinearProgram(self.objective.M[0], np.vstack([A_ub, A_eq]), np.concatenate([b_ub, b_eq]),
                           ["<="] * A_ub.shape[0] + ["=="] * A_eq.shape[0], lower=-np.inf, upper=np.inf)
        sol = lexicographic_solve(lp, opts) if opts.tie_break == "lexicographic" else simplex(lp, opts)
        if sol.status == OPTIMAL:
            sol.objective_value = self.objective.eval(sol.x)
            d = sol.dual_values
            sol.dual_values = constraint_duals(row_map, d[:A_ub.shape[0]], d[A_ub.shape[0]:])
        return sol

    def _solve_qp(self, quad, opts):
        P, q, r = quad
        A_ub, b_ub, A_eq, b_eq, row_map = affine_rows(self.constraints, self.dim)
        solver = lexicographic_qp if opts.tie_break == "lexicographic" else active_set_qp
        sol = solver(P, q, A_ub, b_ub, A_eq, b_eq, opts)
        if sol.status == OPTIMAL:
            sol.objective_value = self.objective.eval(sol.x)
            d = sol.dual_values
            sol.dual_values = constraint_duals(row_map, d[:A_ub.shape[0]], d[A_ub.shape[0]:])
        return sol

    def __repr__(self):
        return "Problem(dim={}, constraints={})".format(self.dim, len(self.constraints))


def _convex_opts(opts):
    return SolverOptions(max_iterations=max(opts.max_iterations, 20000),
                         feasibility_tol=max(opts.feasibility_tol, CONVEX_FEASIBILITY_TOL),
                         optimality_tol=max(opts.optimality_tol, CONVEX_FEASIBILITY_TOL),
                         initial_point=opts.initial_point, tie_break=opts.tie_break)


def project(constraints, x, opts=None):
    """Euclidean projection onto the set described by affine ``constraints``."""
    return _project(list(constraints), x, opts)


class _PenalizedObjective:
    """``f(x) + sum_k ((max(0, lam_k + rho g_k(x)))^2 - lam_k^2) / (2 rho)``."""

    def __init__(self, f, nonlinear, lam, rho):
        self.f, self.g, self.lam, self.rho = f, nonlinear, lam, rho
        self.input_dim = f.input_dim

    def eval(self, x):
        v = self.f.eval(x)
        for k, c in enumerate(self.g):
            s = max(0.0, self.lam[k] + self.rho * c.function.eval(x))
            v += (s * s - self.lam[k] ** 2) / (2 * self.rho)
        return v

    def subgradient(self, x):
        grad = self.f.subgradient(x)
        for k, c in enumerate(self.g):
            s = max(0.0, self.lam[k] + self.rho * c.function.eval(x))
            if s > 0:
                grad = grad + s * c.function.subgradient(x)
        return grad


def _augmented_lagrangian(problem, opts, outer=60):
    affine = [c for c in problem.constraints if c.is_affine]
    nonlinear = [c.canonical() for c in problem.constraints if not c.is_affine]
    lam = np.zeros(len(nonlinear))
    rho = 10.0
    x = opts.initial_point
    viol_prev = np.inf
    inner_tol = 1e-6
    for k in range(outer):
        pen = _PenalizedObjective(problem.objective, nonlinear, lam, rho)
        sol = projected_gradient(pen, affine, SolverOptions(max_iterations=opts.max_iterations,
                                                            optimality_tol=inner_tol, initial_point=x))
        if sol.status == INFEASIBLE:
            return sol
        x = sol.x
        g = np.array([c.function.eval(x) for c in nonlinear])
        viol = max(0.0, g.max())
        lam = np.maximum(0.0, lam + rho * g)
        if viol <= opts.feasibility_tol and inner_tol <= opts.optimality_tol:
            return Solution(x, problem.objective.eval(x), OPTIMAL, iterations=k + 1,
                            info={"multipliers": lam})
        if viol > 0.25 * viol_prev:
            rho *= 10.0
        viol_prev = viol
        inner_tol = max(opts.optimality_tol, inner_tol * 0.1)
    return Solution(x, problem.objective.eval(x), "iteration_limit", iterations=outer)


# -- set-up wrappers ---------------------------------------------------------

@dataclass
class CostCoupledLocal:
    """Agent ``i``'s share ``f_i`` of ``min sum_i f_i(x)  s.t. x in X``."""

    objective: Expression
    constraints: list = field(default_factory=list)
    setup = "cost_coupled"

    def __post_init__(self):
        Problem(self.objective, self.constraints)

    @property
    def dim(self):
        return self.objective.input_dim

    @property
    def problem(self):
        return Problem(self.objective, self.constraints)


@dataclass
class CommonCostLocal:
    """Shared ``f`` plus agent ``i``'s private constraints ``X_i``."""

    objective: Expression
    constraints: list = field(default_factory=list)
    setup = "common_cost"

    def __post_init__(self):
        Problem(self.objective, self.constraints)

    @property
    def dim(self):
        return self.objective.input_dim

    @property
    def problem(self):
        return Problem(self.objective, self.constraints)

    def objective_key(self):
        return self.objective.structural_key()


@dataclass
class ConstraintCoupledLocal:
    """Private ``f_i``, ``X_i`` and affine coupling contribution ``g_i`` in R^S.

    The global coupling constraint is ``sum_i g_i(x_i) <= 0``.
    """

    objective: Expression
    constraints: list
    coupling: Affine
    setup = "constraint_coupled"

    def __post_init__(self):
        Problem(self.objective, self.constraints)
        if not isinstance(self.coupling, Affine):
            raise ExpressionError("coupling function must be affine")
        if self.coupling.input_dim != self.objective.input_dim:
            raise ExpressionError("coupling dimension does not match the local variable")

    @property
    def dim(self):
        return self.objective.input_dim

    @property
    def n_coupling(self):
        return self.coupling.output_dim

    @property
    def problem(self):
        return Problem(self.objective, self.constraints)
