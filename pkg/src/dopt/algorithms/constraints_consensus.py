import hashlib

import numpy as np

from ..solvers import (
    INFEASIBLE,
    OPTIMAL,
    LinearProgram,
    SolverOptions,
    affine_rows,
    lexicographic_qp,
    lexicographic_solve,
)
from .base import Algorithm, AlgorithmError

DROP_TOL = 1e-9


def constraint_rows(constraints, dim):
    """Affine inequalities as sorted unique rows ``(a_1..a_d, b)`` meaning ``a'x <= b``."""
    A_ub, b_ub, A_eq, _, _ = affine_rows(constraints, dim)
    if A_eq.shape[0]:
        raise AlgorithmError("constraints consensus handles inequality constraints only")
    return sorted({tuple(float(v) for v in A_ub[k]) + (float(b_ub[k]),) for k in range(A_ub.shape[0])})


def basis_hash(rows):
    """48-bit digest of a row set, exactly representable as a float."""
    data = np.array(sorted(rows), dtype="<f8").tobytes()
    return float(int.from_bytes(hashlib.sha256(data).digest()[:6], "little"))


class LexSolver:
    """Tie-broken solve of ``min f`` over a set of inequality rows (LP or QP ``f``)."""

    def __init__(self, objective, opts=None):
        self.objective = objective
        self.dim = objective.input_dim
        self.opts = opts or SolverOptions(tie_break="lexicographic")
        if objective.is_affine:
            self.kind = "lp"
        elif objective.quadratic_coefficients() is not None:
            self.kind = "qp"
        else:
            raise AlgorithmError("constraints consensus needs a linear or quadratic objective")

    def __call__(self, rows):
        d = self.dim
        R = np.array(sorted(rows), dtype=float).reshape(-1, d + 1)
        A, b = R[:, :d], R[:, d]
        if self.kind == "lp":
            lp = LinearProgram(self.objective.M[0], A, b, ["<="] * len(b), lower=-np.inf, upper=np.inf)
            return lexicographic_solve(lp, self.opts)
        P, q, _ = self.objective.quadratic_coefficients()
        return lexicographic_qp(P, q, A, b, None, None, self.opts)


def extract_basis(solve, rows, x):
    """Minimal subset of ``rows`` whose tie-broken optimum is still ``x``.

    Slack rows are dropped outright; tight rows are then removed greedily,
    one at a time, keeping a removal when the re-solved optimizer moves by
    at most ``DROP_TOL``.
    """
    def same(sub):
        sol = solve(sub)
        return sol.status == OPTIMAL and np.max(np.abs(sol.x - x), initial=0.0) <= DROP_TOL

    d = x.shape[0]
    tight = [r for r in rows if abs(np.dot(r[:d], x) - r[d]) <= DROP_TOL * (1.0 + abs(r[d]))]
    basis = tight if same(tight) else list(rows)
    for r in list(basis):
        trial = [s for s in basis if s != r]
        if same(trial):
            basis = trial
    return sorted(basis)


class ConstraintsConsensus(Algorithm):
    """Basis exchange for common-cost problems with affine inequality sets.

    Each round an agent pools its own constraints, its basis and the bases
    received from in-neighbors, solves the pooled problem with a
    lexicographic tie-break, and keeps a minimal basis of the result.
    """

    name = "constraints_consensus"
    setup = "common_cost"

    def default_step(self):
        return None

    def _init_state(self):
        data = self.agent.local_data
        self.solver = LexSolver(data.objective)
        self.own_rows = constraint_rows(data.constraints, data.dim)
        self.basis = []
        self._update(self.own_rows, 0)

    def _update(self, rows, t):
        sol = self.solver(rows)
        if sol.status == INFEASIBLE:
            raise AlgorithmError("agent {} round {}: local problem infeasible".format(self.agent.id, t))
        if sol.status != OPTIMAL:
            raise AlgorithmError("agent {} round {}: local solve ended with status {}".format(
                self.agent.id, t, sol.status))
        self.x = sol.x
        self.basis = extract_basis(self.solver, rows, sol.x)

    def basis_tensor(self):
        return np.array(self.basis, dtype=float).reshape(-1, self.agent.local_data.dim + 1)

    def auxiliary(self):
        return {"basis_size": float(len(self.basis)), "basis_hash": basis_hash(self.basis)}

    def iterate(self, t):
        received = self.agent.neighbors_exchange(self.basis_tensor())
        pool = set(self.own_rows) | set(self.basis)
        for j in self.agent.in_neighbors:
            pool |= {tuple(float(v) for v in row) for row in received[j]}
        self._update(sorted(pool), t)

