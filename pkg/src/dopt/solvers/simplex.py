"""
Dense two-phase tableau simplex with Bland's anti-cycling rule.

Free variables that appear in equality rows are substituted out before the
tableau is built (Gauss-Jordan on those columns); this keeps dynamics-style
equality blocks from doubling the column count.
"""

import numpy as np

from .base import (
    INFEASIBLE,
    ITERATION_LIMIT,
    OPTIMAL,
    UNBOUNDED,
    LinearProgram,
    Solution,
    SolverOptions,
)

_PIVOT_TOL = 1e-9


def _pivot(T, r, j):
    T[r] /= T[r, j]
    col = T[:, j].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])


def _run(T, basis, m, cost_row, n_cols, opt_tol, max_iter, allowed):
    """Bland-rule pivoting on ``T`` minimizing the row ``cost_row``.

    Returns ``(status, pivots)``.
    """
    pivots = 0
    while True:
        red = T[cost_row, :n_cols]
        candidates = np.flatnonzero((red < -opt_tol) & allowed)
        if candidates.size == 0:
            return OPTIMAL, pivots
        if pivots >= max_iter:
            return ITERATION_LIMIT, pivots
        j = candidates[0]
        col = T[:m, j]
        pos = np.flatnonzero(col > _PIVOT_TOL)
        if pos.size == 0:
            return UNBOUNDED, pivots
        ratios = T[pos, -1] / col[pos]
        best = ratios.min()
        ties = pos[ratios <= best + 1e-12 * max(1.0, abs(best))]
        r = min(ties, key=lambda k: basis[k])
        _pivot(T, r, j)
        basis[r] = j
        pivots += 1


def _eliminate_free(c, A_ub, b_ub, A_eq, b_eq, free):
    """Substitute free variables out through equality rows.

    Returns the reduced data plus the (row, var) pivots used.
    """
    c = c.copy()
    A_ub, b_ub, A_eq, b_eq = A_ub.copy(), b_ub.copy(), A_eq.copy(), b_eq.copy()
    const = 0.0
    pivots = []
    used = set()
    for r in range(A_eq.shape[0]):
        cand = [j for j in np.flatnonzero(free) if j not in used]
        if not cand:
            break
        vals = np.abs(A_eq[r, cand])
        k = int(np.argmax(vals))
        if vals[k] <= _PIVOT_TOL * max(1.0, np.abs(A_eq[r]).max()):
            continue
        j = cand[k]
        piv = A_eq[r, j]
        A_eq[r] /= piv
        b_eq[r] /= piv
        for rr in range(A_eq.shape[0]):
            if rr != r and A_eq[rr, j] != 0.0:
                f = A_eq[rr, j]
                A_eq[rr] -= f * A_eq[r]
                b_eq[rr] -= f * b_eq[r]
                A_eq[rr, j] = 0.0
        if A_ub.shape[0]:
            f = A_ub[:, j].copy()
            A_ub -= np.outer(f, A_eq[r])
            b_ub -= f * b_eq[r]
            A_ub[:, j] = 0.0
        if c[j] != 0.0:
            const += c[j] * b_eq[r]
            c -= c[j] * A_eq[r]
            c[j] = 0.0
        pivots.append((r, j))
        used.add(j)
    return c, const, A_ub, b_ub, A_eq, b_eq, pivots


def _bounds_only(lp, opts):
    """Closed form for ``min c'x`` over a box; same choices the tableau would make."""
    tol = opts.optimality_tol
    lo, hi, c = lp.lower, lp.upper, lp.c
    if np.any(lo > hi):
        return Solution(np.full(lp.n, np.nan), np.nan, INFEASIBLE)
    x = np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0))
    up = np.isfinite(lo) & (c < -tol)
    down = ~np.isfinite(lo) & (c > tol)
    if np.any(up & ~np.isfinite(hi)) or np.any(down) or np.any(~np.isfinite(lo) & ~np.isfinite(hi) & (c < -tol)):
        return Solution(np.full(lp.n, np.nan), np.nan, UNBOUNDED)
    x[up] = hi[up]
    return Solution(x, float(c @ x), OPTIMAL, dual_values=np.zeros(0))


def simplex(lp, opts=None):
    """Solve ``lp`` to an optimal basic solution with duals.

    Duals follow ``c + A_ub' lam + A_eq' nu - (bound terms) = 0`` with
    ``lam >= 0`` for inequality rows written as ``<=`` (``>=`` rows are
    negated first), so every reported inequality dual is nonnegative.
    """
    opts = opts or SolverOptions()
    if not isinstance(lp, LinearProgram):
        raise TypeError("simplex expects a LinearProgram")
    if lp.m == 0:
        return _bounds_only(lp, opts)
    n = lp.n
    tol = opts.feasibility_tol

    sign = np.array([-1.0 if s == ">=" else 1.0 for s in lp.senses])
    is_eq = np.array([s == "==" for s in lp.senses], dtype=bool)
    A = lp.A * sign[:, None]
    b = lp.b * sign
    ub_idx = np.flatnonzero(~is_eq)
    eq_idx = np.flatnonzero(is_eq)
    A_ub0, b_ub0, A_eq0, b_eq0 = A[ub_idx], b[ub_idx], A[eq_idx], b[eq_idx]

    free = np.isneginf(lp.lower) & np.isposinf(lp.upper)
    c_red, const, A_ub, b_ub, A_eq, b_eq, elim = _eliminate_free(lp.c, A_ub0, b_ub0, A_eq0, b_eq0, free)
    elim_rows = {r for r, _ in elim}
    elim_vars = [j for _, j in elim]
    keep_vars = [j for j in range(n) if j not in set(elim_vars)]
    rest_eq = [r for r in range(A_eq.shape[0]) if r not in elim_rows]

    # map kept variables onto nonnegative standard columns: x_j = off_j + sum coef * z
    cols = []  # (var, coef)
    offset = np.zeros(n)
    extra_ub = []  # (column index, bound) rows z <= bound
    for j in keep_vars:
        lo, hi = lp.lower[j], lp.upper[j]
        if np.isfinite(lo):
            offset[j] = lo
            cols.append((j, 1.0))
            if np.isfinite(hi):
                extra_ub.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            offset[j] = hi
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    nz = len(cols)

    col_var = np.array([j for j, _ in cols], dtype=int)
    col_sign = np.array([s for _, s in cols])

    def to_std(M):
        return M[:, col_var] * col_sign

    rows_A, rows_b, rows_kind = [], [], []
    if A_ub.shape[0]:
        rows_A.append(to_std(A_ub))
        rows_b.append(b_ub - A_ub @ offset)
        rows_kind += [("ub", k) for k in range(A_ub.shape[0])]
    for k, bound in extra_ub:
        row = np.zeros((1, nz))
        row[0, k] = 1.0
        rows_A.append(row)
        rows_b.append(np.array([bound]))
        rows_kind.append(("bound", k))
    if rest_eq:
        Aeq_r = A_eq[rest_eq]
        rows_A.append(to_std(Aeq_r))
        rows_b.append(b_eq[rest_eq] - Aeq_r @ offset)
        rows_kind += [("eq", r) for r in rest_eq]
    c_std = c_red[col_var] * col_sign
    const += c_red @ offset

    m = len(rows_kind)
    A_std = np.vstack(rows_A) if rows_A else np.zeros((0, nz))
    b_std = np.concatenate(rows_b) if rows_b else np.zeros(0)
    has_slack = np.array([k[0] != "eq" for k in rows_kind], dtype=bool)
    n_slack = int(has_slack.sum())
    slack_col = np.full(m, -1)
    slack_col[has_slack] = nz + np.arange(n_slack)

    row_sign = np.where(b_std < 0, -1.0, 1.0)
    needs_art = ~has_slack | (b_std < 0)
    art_rows = np.flatnonzero(needs_art)
    n_art = art_rows.size
    N = nz + n_slack + n_art

    T = np.zeros((m + 2, N + 1))
    T[:m, :nz] = A_std
    T[np.flatnonzero(has_slack), slack_col[has_slack]] = 1.0
    T[:m, -1] = b_std
    T[:m] *= row_sign[:, None]
    basis = np.zeros(m, dtype=int)
    for r in range(m):
        if not needs_art[r]:
            basis[r] = slack_col[r]
    for k, r in enumerate(art_rows):
        T[r, nz + n_slack + k] = 1.0
        basis[r] = nz + n_slack + k

    cost2, cost1 = m, m + 1
    T[cost2, :nz] = c_std
    T[cost1, nz + n_slack:N] = 1.0
    for r in range(m):
        if T[cost2, basis[r]] != 0.0:
            T[cost2] -= T[cost2, basis[r]] * T[r]
        if T[cost1, basis[r]] != 0.0:
            T[cost1] -= T[cost1, basis[r]] * T[r]

    total_pivots = 0
    active_rows = np.ones(m, dtype=bool)
    if n_art:
        allowed = np.ones(N, dtype=bool)
        status, piv = _run(T, basis, m, cost1, N, opts.optimality_tol * 1e-3, opts.max_iterations, allowed)
        total_pivots += piv
        if status == ITERATION_LIMIT:
            return Solution(np.full(n, np.nan), np.nan, ITERATION_LIMIT, iterations=total_pivots)
        if -T[cost1, -1] > tol * max(1.0, np.abs(b_std).max(initial=0.0)):
            return Solution(np.full(n, np.nan), np.nan, INFEASIBLE, iterations=total_pivots)
        # drive artificial variables out of the basis
        for r in range(m):
            if basis[r] >= nz + n_slack:
                row = T[r, :nz + n_slack]
                cand = np.flatnonzero(np.abs(row) > _PIVOT_TOL)
                if cand.size:
                    _pivot(T, r, cand[0])
                    basis[r] = cand[0]
                else:
                    active_rows[r] = False
        keep = np.flatnonzero(active_rows)
        T = np.vstack([T[keep], T[[cost2]]])
        basis = basis[keep]
        m_act = keep.size
        T = np.delete(T, np.s_[nz + n_slack:N], axis=1)
        N = nz + n_slack
        cost2 = m_act
    else:
        keep = np.arange(m)
        T = np.delete(T, cost1, axis=0)
        m_act = m

    status, piv = _run(T, basis, m_act, cost2, N, opts.optimality_tol, opts.max_iterations - total_pivots,
                       np.ones(N, dtype=bool))
    total_pivots += piv
    if status != OPTIMAL:
        return Solution(np.full(n, np.nan), np.nan, status, iterations=total_pivots)

    z = np.zeros(N)
    z[basis] = T[:m_act, -1]
    x = offset.copy()
    np.add.at(x, col_var, col_sign * z[:nz])
    # back-substitute eliminated variables (each pivot row holds one of them)
    for r, j in elim:
        row = A_eq[r].copy()
        row[j] = 0.0
        x[j] = b_eq[r] - row @ x

    # duals: y solves B' y = c_B on the sign-normalized standard rows
    A_full = np.zeros((m, N))
    A_full[:, :nz] = A_std
    A_full[np.flatnonzero(has_slack), slack_col[has_slack]] = 1.0
    A_full *= row_sign[:, None]
    c_full = np.zeros(N)
    c_full[:nz] = c_std
    y = np.zeros(m)
    if m_act:
        B = A_full[np.ix_(keep, basis)]
        try:
            y[keep] = np.linalg.solve(B.T, c_full[basis])
        except np.linalg.LinAlgError:
            y[keep] = np.linalg.lstsq(B.T, c_full[basis], rcond=None)[0]
    shadow = y * row_sign  # d(opt)/d(b_std) before the sign flip

    lam = np.zeros(A_ub0.shape[0])
    nu = np.zeros(A_eq0.shape[0])
    for r, (kind, k) in enumerate(rows_kind):
        if kind == "ub":
            lam[k] = max(0.0, -shadow[r])
        elif kind == "eq":
            nu[k] = -shadow[r]
    if elim:
        R = [r for r, _ in elim]
        E = elim_vars
        rhs = -(lp.c[E] + A_ub0[:, E].T @ lam)
        if rest_eq:
            rhs -= A_eq0[np.ix_(rest_eq, E)].T @ nu[rest_eq]
        nu[R] = np.linalg.solve(A_eq0[np.ix_(R, E)].T, rhs)

    duals = np.zeros(lp.m)
    duals[ub_idx] = lam
    duals[eq_idx] = nu
    return Solution(x, float(lp.c @ x), OPTIMAL, dual_values=duals, iterations=total_pivots)


def _sorted_rows(lp):
    """Canonical row order so the answer does not depend on input order."""
    sign = np.array([-1.0 if s == ">=" else 1.0 for s in lp.senses])
    A = lp.A * sign[:, None]
    b = lp.b * sign
    senses = ["==" if s == "==" else "<=" for s in lp.senses]
    keys = [(senses[k],) + tuple(A[k]) + (b[k],) for k in range(lp.m)]
    order = sorted(range(lp.m), key=lambda k: keys[k])
    return A[order], b[order], [senses[k] for k in order], order


def lexicographic_solve(lp, opts=None):
    """Lexicographically smallest optimal solution of ``lp``.

    Fixes the optimal cost, then minimizes ``x_1``, fixes it, minimizes
    ``x_2``, and so on. Rows are sorted first, so permuting them does not
    change the result.
    """
    opts = opts or SolverOptions()
    A, b, senses, order = _sorted_rows(lp)
    base = LinearProgram(lp.c, A, b, senses, lp.lower, lp.upper)
    first = simplex(base, opts)
    if first.status != OPTIMAL:
        return first
    rows_A, rows_b, rows_s = [A, lp.c[None, :]], [b, [first.objective_value]], senses + ["=="]
    x = first.x
    pivots = first.iterations
    for k in range(lp.n):
        obj = np.zeros(lp.n)
        obj[k] = 1.0
        sub = LinearProgram(obj, np.vstack(rows_A), np.concatenate([np.ravel(v) for v in rows_b]), rows_s,
                            lp.lower, lp.upper)
        sol = simplex(sub, opts)
        pivots += sol.iterations
        if sol.status != OPTIMAL:
            return Solution(x, first.objective_value, sol.status, iterations=pivots)
        x = sol.x
        rows_A.append(obj[None, :])
        rows_b.append([x[k]])
        rows_s.append("==")
    duals = np.zeros(lp.m)
    duals[order] = first.dual_values
    return Solution(x, float(lp.c @ x), OPTIMAL, dual_values=duals, iterations=pivots,
                    info={"tie_break": "lexicographic"})
