import numpy as np

from .base import INFEASIBLE, ITERATION_LIMIT, OPTIMAL, Solution, SolverOptions, affine_rows
from .qp import active_set_qp

ARMIJO = 1e-4


class ProjectionError(ValueError):
    pass


def box_bounds(constraints, dim):
    """Per-coordinate bounds if every constraint is a coordinate bound, else None."""
    lo = np.full(dim, -np.inf)
    hi = np.full(dim, np.inf)
    for c in constraints:
        if not c.is_affine or c.is_equality:
            return None
        c = c.canonical()
        M, q = c.function.M, c.function.q
        for k in range(M.shape[0]):
            nz = np.flatnonzero(M[k])
            if nz.size == 0:
                if q[k] > 0:
                    raise ProjectionError("constraint set is empty (0 <= {})".format(-q[k]))
                continue
            if nz.size > 1:
                return None
            j = nz[0]
            bound = -q[k] / M[k, j]
            if M[k, j] > 0:
                hi[j] = min(hi[j], bound)
            else:
                lo[j] = max(lo[j], bound)
    if np.any(lo > hi):
        raise ProjectionError("box constraints are empty")
    return lo, hi


def project(constraints, x, opts=None):
    """Euclidean projection of ``x`` onto the set cut out by affine constraints."""
    x = np.asarray(x, dtype=float).reshape(-1)
    dim = x.shape[0]
    if not constraints:
        return x.copy()
    box = box_bounds(constraints, dim)
    if box is not None:
        return np.clip(x, box[0], box[1])
    A_ub, b_ub, A_eq, b_eq, _ = affine_rows(constraints, dim)
    sol = active_set_qp(np.eye(dim), -x, A_ub, b_ub, A_eq, b_eq, opts)
    if sol.status == INFEASIBLE:
        raise ProjectionError("cannot project onto an empty set")
    return sol.x


class Projector:
    """Reuses the box/QP decision and the previous projection as a warm start."""

    def __init__(self, constraints, dim):
        self.constraints = constraints
        self.box = box_bounds(constraints, dim) if constraints else None
        if constraints and self.box is None:
            self.rows = affine_rows(constraints, dim)[:4]
        self.last = None

    def __call__(self, x):
        if not self.constraints:
            return x.copy()
        if self.box is not None:
            return np.clip(x, self.box[0], self.box[1])
        A_ub, b_ub, A_eq, b_eq = self.rows
        sol = active_set_qp(np.eye(x.shape[0]), -x, A_ub, b_ub, A_eq, b_eq,
                            SolverOptions(initial_point=self.last))
        if sol.status == INFEASIBLE:
            raise ProjectionError("cannot project onto an empty set")
        self.last = sol.x
        return sol.x


def projected_gradient(f, constraints=(), opts=None):
    """Minimize a smooth convex ``f`` over affine ``constraints``.

    Barzilai-Borwein trial steps, Armijo backtracking by halving. Stops
    once the gradient map ``||x - proj(x - grad f(x))||`` drops below the
    optimality tolerance. The objective never increases between iterates.
    """
    opts = opts or SolverOptions()
    constraints = list(constraints)
    dim = f.input_dim
    proj = Projector(constraints, dim)
    x0 = np.zeros(dim) if opts.initial_point is None else np.asarray(opts.initial_point, dtype=float).reshape(-1)
    try:
        x = proj(x0)
    except ProjectionError:
        return Solution(np.full(dim, np.nan), np.nan, INFEASIBLE)
    fx = f.eval(x)
    g = f.subgradient(x)
    values = [fx]
    t = 1.0
    x_prev = g_prev = None
    for it in range(opts.max_iterations):
        gmap = np.linalg.norm(x - proj(x - g))
        if gmap <= opts.optimality_tol:
            return Solution(x, fx, OPTIMAL, iterations=it, info={"values": values, "gradient_map": gmap})
        if x_prev is not None:
            s, y = x - x_prev, g - g_prev
            sy = s @ y
            t = (s @ s) / sy if sy > 1e-300 else min(1e10, 2.0 * t)
        while True:
            x_new = proj(x - t * g)
            f_new = f.eval(x_new)
            if f_new <= fx + ARMIJO * (g @ (x_new - x)):
                break
            t *= 0.5
            if t < 1e-30:
                # stalled at working precision
                return Solution(x, fx, ITERATION_LIMIT, iterations=it,
                                info={"values": values, "gradient_map": gmap, "stalled": True})
        x_prev, g_prev = x, g
        x, fx = x_new, f_new
        g = f.subgradient(x)
        values.append(fx)
    gmap = np.linalg.norm(x - proj(x - g))
    return Solution(x, fx, OPTIMAL if gmap <= opts.optimality_tol else ITERATION_LIMIT,
                    iterations=opts.max_iterations, info={"values": values, "gradient_map": gmap})
