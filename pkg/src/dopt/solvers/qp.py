"""
Primal active-set method for small convex QPs::

    min  x'Px/2 + q'x   s.t.  A_ub x <= b_ub,  A_eq x == b_eq

``P`` may be singular. Zero-curvature descent directions are followed to
the next blocking constraint; if none blocks, the problem is unbounded.
"""

import numpy as np

from .base import INFEASIBLE, ITERATION_LIMIT, OPTIMAL, UNBOUNDED, LinearProgram, Solution, SolverOptions
from .simplex import simplex

_EIG_TOL = 1e-11


def _null_space(M, n):
    if M.shape[0] == 0:
        return np.eye(n)
    _, s, Vt = np.linalg.svd(M)
    rank = int(np.sum(s > 1e-10 * max(1.0, s.max(initial=0.0))))
    return Vt[rank:].T


def _feasible_point(A_ub, b_ub, A_eq, b_eq, n, opts):
    A = np.vstack([A_ub, A_eq])
    b = np.concatenate([b_ub, b_eq])
    senses = ["<="] * A_ub.shape[0] + ["=="] * A_eq.shape[0]
    lp = LinearProgram(np.zeros(n), A, b, senses, lower=-np.inf, upper=np.inf)
    sol = simplex(lp, SolverOptions(feasibility_tol=opts.feasibility_tol, max_iterations=opts.max_iterations))
    return sol.x if sol.status == OPTIMAL else None


def _independent(rows, cand):
    if not rows:
        return np.linalg.norm(cand) > 1e-12
    M = np.vstack(rows + [cand])
    return np.linalg.matrix_rank(M, tol=1e-10) == len(rows) + 1


def active_set_qp(P, q, A_ub=None, b_ub=None, A_eq=None, b_eq=None, opts=None):
    """Solve a convex QP; returns a :class:`Solution` with ``dual_values``.

    Duals are stacked ``[lam_ub, nu_eq]`` with ``P x + q + A_ub' lam +
    A_eq' nu = 0`` and ``lam >= 0``. On a singular ``P`` the final point is
    moved to the minimum-norm solution of the last equality-constrained
    subproblem when that keeps it feasible.
    """
    opts = opts or SolverOptions()
    P = np.array(P, dtype=float, ndmin=2)
    q = np.asarray(q, dtype=float).reshape(-1)
    n = q.shape[0]
    A_ub = np.zeros((0, n)) if A_ub is None else np.array(A_ub, dtype=float, ndmin=2).reshape(-1, n)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).reshape(-1)
    A_eq = np.zeros((0, n)) if A_eq is None else np.array(A_eq, dtype=float, ndmin=2).reshape(-1, n)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).reshape(-1)
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    tol = opts.feasibility_tol

    def objective(x):
        return float(0.5 * x @ P @ x + q @ x)

    x = None
    if opts.initial_point is not None:
        x0 = np.asarray(opts.initial_point, dtype=float).reshape(-1)
        if np.all(A_ub @ x0 - b_ub <= tol) and np.all(np.abs(A_eq @ x0 - b_eq) <= tol):
            x = x0.copy()
    if x is None:
        if m_ub + m_eq == 0:
            x = np.zeros(n)
        else:
            x = _feasible_point(A_ub, b_ub, A_eq, b_eq, n, opts)
            if x is None:
                return Solution(np.full(n, np.nan), np.nan, INFEASIBLE, dual_values=None)

    # working set: all equalities plus independent active inequalities
    work_rows = [A_eq[k] for k in range(m_eq)]
    W = []
    for k in range(m_ub):
        if abs(A_ub[k] @ x - b_ub[k]) <= tol and _independent(work_rows, A_ub[k]):
            W.append(k)
            work_rows.append(A_ub[k])

    for it in range(opts.max_iterations):
        g = P @ x + q
        A_W = np.vstack([A_eq, A_ub[W]]) if (m_eq or W) else np.zeros((0, n))
        Z = _null_space(A_W, n)
        p = np.zeros(n)
        ray = None
        if Z.shape[1]:
            H = Z.T @ P @ Z
            r = Z.T @ g
            e, V = np.linalg.eigh(H)
            scale = max(1.0, np.abs(e).max(initial=0.0))
            pos = e > _EIG_TOL * scale
            coef = V.T @ r
            if np.any(~pos) and np.linalg.norm(coef[~pos]) > opts.optimality_tol * max(1.0, np.linalg.norm(g)):
                ray = -Z @ (V[:, ~pos] @ coef[~pos])
            else:
                p = Z @ (V[:, pos] @ (-coef[pos] / e[pos]))

        direction = ray if ray is not None else p
        if ray is None and np.linalg.norm(p) <= 1e-12 * max(1.0, np.linalg.norm(x)):
            # stationary on the working set: check multiplier signs
            if A_W.shape[0]:
                mult = np.linalg.lstsq(A_W.T, -g, rcond=None)[0]
            else:
                mult = np.zeros(0)
            lam_w = mult[m_eq:]
            if lam_w.size == 0 or lam_w.min() >= -opts.optimality_tol * max(1.0, np.abs(lam_w).max()):
                lam = np.zeros(m_ub)
                lam[W] = np.maximum(lam_w, 0.0)
                nu = mult[:m_eq]
                x = _min_norm_polish(x, P, A_W, A_ub, b_ub, A_eq, b_eq, tol)
                return Solution(x, objective(x), OPTIMAL, dual_values=np.concatenate([lam, nu]),
                                iterations=it, info={"working_set": list(W)})
            drop = int(np.argmin(lam_w))
            W.pop(drop)
            continue

        # ratio test against inactive inequalities
        step = np.inf if ray is not None else 1.0
        block = None
        slopes = A_ub @ direction
        for k in range(m_ub):
            if k in W or slopes[k] <= 1e-14 * max(1.0, np.linalg.norm(direction)):
                continue
            t = max(0.0, (b_ub[k] - A_ub[k] @ x) / slopes[k])
            if t < step - 1e-15:
                step, block = t, k
        if block is None and ray is not None:
            return Solution(np.full(n, np.nan), -np.inf, UNBOUNDED, iterations=it)
        x = x + step * direction
        if block is not None:
            W.append(block)
    return Solution(x, objective(x), ITERATION_LIMIT, iterations=opts.max_iterations)


def _min_norm_polish(x, P, A_W, A_ub, b_ub, A_eq, b_eq, tol):
    M = np.vstack([A_W, P]) if A_W.shape[0] else P
    N = _null_space(M, x.shape[0])
    if N.shape[1] == 0:
        return x
    y = x - N @ (N.T @ x)
    if np.all(A_ub @ y - b_ub <= tol) and np.all(np.abs(A_eq @ y - b_eq) <= tol):
        return y
    return x


def lexicographic_qp(P, q, A_ub=None, b_ub=None, A_eq=None, b_eq=None, opts=None):
    """Minimum-norm point among all optimal solutions of a convex QP.

    The optimal face of a convex QP is ``{x feasible : P x = P x*, q'x = q'x*}``;
    the second stage minimizes ``||x||^2 / 2`` over it, which is unique.
    """
    opts = opts or SolverOptions()
    first = active_set_qp(P, q, A_ub, b_ub, A_eq, b_eq, opts)
    if first.status != OPTIMAL:
        return first
    P = np.array(P, dtype=float, ndmin=2)
    q = np.asarray(q, dtype=float).reshape(-1)
    n = q.shape[0]
    xs = first.x
    U, s, _ = np.linalg.svd(P)
    rank = int(np.sum(s > 1e-10 * max(1.0, s.max(initial=0.0))))
    face = [U[:, :rank].T]
    q_perp = q - U[:, :rank] @ (U[:, :rank].T @ q)
    if np.linalg.norm(q_perp) > 1e-12:
        face.append(q_perp[None, :] / np.linalg.norm(q_perp))
    F = np.vstack(face)
    A_eq2 = F if A_eq is None else np.vstack([np.array(A_eq, dtype=float, ndmin=2).reshape(-1, n), F])
    b_eq2 = F @ xs if b_eq is None else np.concatenate([np.asarray(b_eq, dtype=float).reshape(-1), F @ xs])
    # loosen feasibility slightly: the face equalities carry rounding from stage one
    opts2 = SolverOptions(max_iterations=opts.max_iterations, feasibility_tol=max(opts.feasibility_tol, 1e-9),
                          optimality_tol=opts.optimality_tol, initial_point=xs)
    second = active_set_qp(np.eye(n), np.zeros(n), A_ub, b_ub, A_eq2, b_eq2, opts2)
    if second.status != OPTIMAL:
        return first
    x = second.x
    return Solution(x, float(0.5 * x @ P @ x + q @ x), OPTIMAL, dual_values=first.dual_values,
                    iterations=first.iterations + second.iterations, info={"tie_break": "min_norm"})
