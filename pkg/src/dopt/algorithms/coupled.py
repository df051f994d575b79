"""Algorithms for constraint-coupled problems ``sum_i g_i(x_i) <= 0``."""

import numpy as np

from ..functions import Affine, Constraint, QuadraticForm, Variable
from .base import Algorithm, AlgorithmError
from .local import LocalSolver

DEFAULT_PENALTY = 1e3


class DualSubgradient(Algorithm):
    """Distributed dual subgradient with running-average primal recovery.

    ``nu_i = sum_j a_ij mu_j``; ``x_i = argmin f_i + nu_i' g_i`` over ``X_i``;
    ``mu_i = max(0, nu_i + alpha^t g_i(x_i))``. The logged iterate is the
    average of ``x_i^1 .. x_i^t``; the raw minimizer is logged as ``x_raw``.
    """

    name = "dual_subgradient"
    setup = "constraint_coupled"

    def _init_state(self):
        data = self.agent.local_data
        self.solver = LocalSolver(data.objective, data.constraints)
        S = data.n_coupling
        self.mu = np.zeros(S) if self.initial_condition is None else np.array(self.initial_condition, dtype=float)
        if self.mu.shape != (S,) or np.any(self.mu < 0):
            raise AlgorithmError("initial multiplier must be a nonnegative {}-vector".format(S))
        self.x_raw = self._argmin(self.mu, 0)
        self.x = self.x_raw.copy()

    def _argmin(self, nu, t):
        G = self.agent.local_data.coupling.M
        x, _ = self.solver.solve(linear=nu @ G, context="agent {} round {}".format(self.agent.id, t))
        return x

    def auxiliary(self):
        return {"mu": self.mu, "x_raw": self.x_raw}

    def iterate(self, t):
        received = self.agent.neighbors_exchange(self.mu)
        nu = self.agent.mix(self.mu, received)
        self.x_raw = self._argmin(nu, t)
        g = self.agent.local_data.coupling.eval(self.x_raw)
        self.mu = np.maximum(0.0, nu + self.stepsize(t) * g)
        if t == 1:
            self.x = self.x_raw.copy()
        else:
            self.x = self.x + (self.x_raw - self.x) / t


def _lift_objective(f, penalty):
    """``f(x) + penalty * rho`` over the stacked ``(x, rho)``."""
    d = f.input_dim
    if f.is_affine:
        return Affine(np.hstack([f.M, [[penalty]]]), f.q)
    quad = f.quadratic_coefficients()
    if quad is None:
        raise AlgorithmError("primal decomposition needs a linear or quadratic local cost")
    P, q, r = quad
    P2 = np.zeros((d + 1, d + 1))
    P2[:d, :d] = P
    return QuadraticForm(Variable(d + 1), P2, np.append(q, penalty), r)


def _lift_constraint(c):
    c = c.canonical()
    if not c.is_affine:
        raise AlgorithmError("primal decomposition needs affine local constraints")
    f = c.function
    return Constraint(Affine(np.hstack([f.M, np.zeros((f.output_dim, 1))]), f.q), c.sense)


class PrimalDecomposition(Algorithm):
    """Distributed primal decomposition on an undirected graph.

    Agent ``i`` holds an allocation ``y_i`` (``sum_i y_i = 0``) and solves::

        min f_i(x) + M rho   s.t.  x in X_i,  g_i(x) <= y_i + rho 1,  rho >= 0

    ``mu_i`` is the multiplier of the allocation rows. After a keyed exchange
    of ``mu``: ``y_i += alpha^t sum_j (mu_i - mu_j)``, then the local problem
    is solved again.
    """

    name = "primal_decomposition"
    setup = "constraint_coupled"

    def __init__(self, agent, initial_condition=None, stepsize=None, enable_log=True, penalty=DEFAULT_PENALTY):
        super().__init__(agent, initial_condition, stepsize, enable_log)
        if agent.in_neighbors != agent.out_neighbors:
            raise AlgorithmError("primal decomposition needs an undirected graph (agent {})".format(agent.id))
        if not penalty > 0:
            raise AlgorithmError("penalty must be positive")
        self.penalty = float(penalty)

    def _init_state(self):
        data = self.agent.local_data
        d, S = data.dim, data.n_coupling
        rho_nonneg = Constraint(Affine(np.append(np.zeros(d), -1.0)[None, :]))
        lifted = [_lift_constraint(c) for c in data.constraints] + [rho_nonneg]
        self.solver = LocalSolver(_lift_objective(data.objective, self.penalty), lifted)
        G, q = data.coupling.M, data.coupling.q
        self._A_alloc = np.hstack([G, -np.ones((S, 1))])
        self._q_alloc = q
        self.y = np.zeros(S) if self.initial_condition is None else np.array(self.initial_condition, dtype=float)
        if self.y.shape != (S,):
            raise AlgorithmError("initial allocation must be a {}-vector".format(S))
        self._solve(0)

    def _solve(self, t):
        z, duals = self.solver.solve(A_extra=self._A_alloc, b_extra=self.y - self._q_alloc,
                                     context="agent {} round {}".format(self.agent.id, t))
        self.x, self.rho = z[:-1], max(0.0, float(z[-1]))
        self.mu = np.maximum(0.0, duals)

    def auxiliary(self):
        return {"y": self.y, "mu": self.mu, "rho": self.rho}

    def iterate(self, t):
        received = self.agent.neighbors_exchange_keyed({j: self.mu for j in self.agent.out_neighbors})
        step = np.zeros_like(self.y)
        for j in self.agent.in_neighbors:
            step = step + (self.mu - received[j])
        self.y = self.y + self.stepsize(t) * step
        self._solve(t)
