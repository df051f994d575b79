"""Centralized reference solves of pooled instances."""

from dataclasses import dataclass

import numpy as np

from ..functions import Affine, Constraint, QuadraticForm, Sum, Variable
from ..problem import Problem
from ..solvers import SolverOptions
from ..solvers.base import OPTIMAL
from ..solvers.gradient import projected_gradient


@dataclass
class OracleResult:
    x: object  # vector, or list of per-agent blocks for constraint-coupled data
    value: float
    status: str
    coupling_duals: np.ndarray = None


def _sum_objective(local):
    return Sum([p.objective for p in local])


def _stacked(local):
    """Block-diagonal LP/QP over ``(x_1, ..., x_N)`` with the coupling as one constraint."""
    dims = [p.dim for p in local]
    n = sum(dims)
    offs = np.concatenate([[0], np.cumsum(dims)])
    P = np.zeros((n, n))
    q = np.zeros(n)
    r = 0.0
    quadratic = False
    constraints = []
    G = np.zeros((local[0].n_coupling, n))
    gq = np.zeros(local[0].n_coupling)
    for i, p in enumerate(local):
        sl = slice(offs[i], offs[i + 1])
        if p.objective.is_affine:
            q[sl] += p.objective.M[0]
            r += float(p.objective.q[0])
        else:
            Pi, qi, ri = p.objective.quadratic_coefficients()
            P[sl, sl] += Pi
            q[sl] += qi
            r += ri
            quadratic = True
        for c in p.constraints:
            c = c.canonical()
            M = np.zeros((c.function.output_dim, n))
            M[:, sl] = c.function.M
            constraints.append(Constraint(Affine(M, c.function.q), c.sense))
        G[:, sl] = p.coupling.M
        gq += p.coupling.q
    z = Variable(n)
    obj = QuadraticForm(z, P, q, r) if quadratic else Affine(q[None, :], [r])
    coupling = Constraint(Affine(G, gq))
    return Problem(obj, constraints + [coupling]), offs


def _newton_polish(f, x, steps=20, h=1e-6):
    """A few Newton steps with a finite-difference Hessian, for smooth unconstrained ``f``."""
    n = x.shape[0]
    for _ in range(steps):
        g = f.subgradient(x)
        H = np.empty((n, n))
        for k in range(n):
            e = np.zeros(n)
            e[k] = h
            H[:, k] = (f.subgradient(x + e) - f.subgradient(x - e)) / (2 * h)
        dx = np.linalg.solve(0.5 * (H + H.T), g)
        if f.eval(x - dx) > f.eval(x) + 1e-12 * abs(f.eval(x)):
            break
        x = x - dx
        if np.linalg.norm(dx) <= 1e-15 * max(1.0, np.linalg.norm(x)):
            break
    return x


def centralized_oracle(local, opts=None):
    """Solve the pooled problem behind a list of per-agent local data.

    * cost-coupled: ``min sum_i f_i`` over the shared ``X``
    * common-cost: ``min f`` over the intersection of all ``X_i``, lexicographic tie-break
    * constraint-coupled: block LP/QP with ``sum_i g_i(x_i) <= 0``
    """
    setup = local[0].setup
    if setup == "cost_coupled":
        f = _sum_objective(local)
        if not local[0].constraints:
            # first-order solve to a loose tolerance, then Newton to full precision
            sol = projected_gradient(f, (), opts or SolverOptions(max_iterations=2000, optimality_tol=1e-6))
            x = _newton_polish(f, sol.x)
            if np.linalg.norm(f.subgradient(x)) <= 1e-9 * max(1.0, abs(f.eval(x))):
                return OracleResult(x, float(f.eval(x)), OPTIMAL)
            return OracleResult(sol.x, float(sol.objective_value), sol.status)
        sol = Problem(f, local[0].constraints).solve(opts or SolverOptions(max_iterations=100000, optimality_tol=1e-12))
        return OracleResult(sol.x, float(sol.objective_value), sol.status)
    if setup == "common_cost":
        opts = opts or SolverOptions(tie_break="lexicographic")
        cons = [c for p in local for c in p.constraints]
        sol = Problem(local[0].objective, cons).solve(opts)
        return OracleResult(sol.x, float(sol.objective_value), sol.status)
    if setup == "constraint_coupled":
        prob, offs = _stacked(local)
        sol = prob.solve(opts or SolverOptions(max_iterations=100000))
        blocks = [sol.x[offs[i]:offs[i + 1]] for i in range(len(local))]
        duals = np.atleast_1d(sol.dual_values[-1]) if sol.dual_values is not None else None
        return OracleResult(blocks, float(sol.objective_value), sol.status, duals)
    raise ValueError("unknown set-up {!r}".format(setup))
