"""Repeated local solves with a fixed feasible set and a moving linear term."""

import numpy as np

from ..functions import Affine, Constraint
from ..problem import Problem
from ..solvers.simplex import _eliminate_free
from ..solvers import (
    OPTIMAL,
    LinearProgram,
    SolverError,
    SolverOptions,
    active_set_qp,
    affine_rows,
    simplex,
)


class LocalSolver:
    """``min f(x) + c'x  s.t.  x in X,  A_x x <= b_x`` for varying ``c``, ``b_x``.

    The rows of ``X`` are stacked once. Affine ``f`` goes to the simplex,
    quadratic ``f`` to the active-set QP, anything else through
    :meth:`Problem.solve`. ``solve`` returns ``(x, duals of the extra rows)``.
    """

    def __init__(self, objective, constraints, opts=None):
        self.objective = objective
        self.constraints = list(constraints)
        self.dim = objective.input_dim
        self.opts = opts or SolverOptions()
        self.affine_set = all(c.is_affine for c in self.constraints)
        self.kind = "general"
        if self.affine_set:
            if objective.is_affine:
                self.kind = "lp"
            elif objective.quadratic_coefficients() is not None:
                self.kind = "qp"
        if self.kind != "general":
            self.A_ub, self.b_ub, self.A_eq, self.b_eq, _ = affine_rows(self.constraints, self.dim)
            self.lower = np.full(self.dim, -np.inf)
            self.upper = np.full(self.dim, np.inf)
            if self.kind == "lp":
                self._split_bounds()
                self._reduce_equalities()

    def _split_bounds(self):
        # single-variable rows become simplex bounds
        keep = []
        for k in range(self.A_ub.shape[0]):
            row = self.A_ub[k]
            nz = np.flatnonzero(row)
            if nz.size == 1:
                j = nz[0]
                v = self.b_ub[k] / row[j]
                if row[j] > 0:
                    self.upper[j] = min(self.upper[j], v)
                else:
                    self.lower[j] = max(self.lower[j], v)
            else:
                keep.append(k)
        self.A_ub, self.b_ub = self.A_ub[keep], self.b_ub[keep]

    def _reduce_equalities(self):
        # x = Phi x_keep + phi0: free variables pinned by equality rows are
        # substituted once, so each solve sees a smaller LP
        n = self.dim
        free = np.isneginf(self.lower) & np.isposinf(self.upper)
        _, _, _, _, A_eq, b_eq, pivots = _eliminate_free(np.zeros(n), np.zeros((0, n)), np.zeros(0),
                                                         self.A_eq, self.b_eq, free)
        elim = [j for _, j in pivots]
        keep = [j for j in range(n) if j not in set(elim)]
        Phi = np.zeros((n, len(keep)))
        phi0 = np.zeros(n)
        Phi[keep, np.arange(len(keep))] = 1.0
        for r, j in pivots:
            Phi[j] = -A_eq[r, keep]
            phi0[j] = b_eq[r]
        rest = [r for r in range(A_eq.shape[0]) if r not in {r for r, _ in pivots}]
        self.Phi, self.phi0, self.keep = Phi, phi0, keep
        self.A_ub_red = self.A_ub @ Phi
        self.b_ub_red = self.b_ub - self.A_ub @ phi0
        self.A_eq_red = A_eq[rest][:, keep]
        self.b_eq_red = b_eq[rest]

    def solve(self, linear=None, A_extra=None, b_extra=None, context=""):
        n = self.dim
        linear = np.zeros(n) if linear is None else np.asarray(linear, dtype=float)
        A_extra = np.zeros((0, n)) if A_extra is None else np.asarray(A_extra, dtype=float)
        b_extra = np.zeros(0) if b_extra is None else np.asarray(b_extra, dtype=float)
        k = A_extra.shape[0]
        if self.kind == "lp":
            Phi, phi0 = self.Phi, self.phi0
            A = np.vstack([A_extra @ Phi, self.A_ub_red, self.A_eq_red])
            b = np.concatenate([b_extra - A_extra @ phi0, self.b_ub_red, self.b_eq_red])
            senses = ["<="] * (k + self.A_ub_red.shape[0]) + ["=="] * self.A_eq_red.shape[0]
            lp = LinearProgram((self.objective.M[0] + linear) @ Phi, A, b, senses,
                               lower=self.lower[self.keep], upper=self.upper[self.keep])
            sol = simplex(lp, self.opts)
            sol.require_optimal(context)
            return Phi @ sol.x + phi0, sol.dual_values[:k]
        if self.kind == "qp":
            P, q, _ = self.objective.quadratic_coefficients()
            sol = active_set_qp(P, q + linear, np.vstack([A_extra, self.A_ub]),
                                np.concatenate([b_extra, self.b_ub]), self.A_eq, self.b_eq, self.opts)
            sol.require_optimal(context)
            return sol.x, sol.dual_values[:k]
        extra = [Constraint(Affine(A_extra[r:r + 1], -b_extra[r:r + 1])) for r in range(k)]
        obj = self.objective + Affine(linear[None, :]) if np.any(linear) else self.objective
        sol = Problem(obj, extra + self.constraints).solve(self.opts)
        if sol.status != OPTIMAL:
            raise SolverError(sol.status, context)
        if k and sol.dual_values is None:
            raise SolverError(sol.status, context + ": no duals for nonlinear constraints")
        duals = np.array([sol.dual_values[r] for r in range(k)], dtype=float) if k else np.zeros(0)
        return sol.x, duals

