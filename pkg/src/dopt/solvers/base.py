from dataclasses import dataclass, field

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"


class SolverError(RuntimeError):
    """Raised when a caller demands an optimal solution and does not get one."""

    def __init__(self, status, message=""):
        super().__init__("solver status {}{}".format(status, ": " + message if message else ""))
        self.status = status


@dataclass
class SolverOptions:
    max_iterations: int = 10000
    feasibility_tol: float = 1e-9
    optimality_tol: float = 1e-9
    initial_point: object = None
    tie_break: str = "none"

    def __post_init__(self):
        if self.feasibility_tol <= 0 or self.optimality_tol <= 0:
            raise ValueError("solver tolerances must be positive")
        if self.tie_break not in ("none", "lexicographic"):
            raise ValueError("tie_break must be 'none' or 'lexicographic', got {!r}".format(self.tie_break))


@dataclass
class Solution:
    x: np.ndarray
    objective_value: float
    status: str
    dual_values: np.ndarray = None
    iterations: int = 0
    info: dict = field(default_factory=dict)

    @property
    def optimal(self):
        return self.status == OPTIMAL

    def require_optimal(self, context=""):
        if self.status != OPTIMAL:
            raise SolverError(self.status, context)
        return self


@dataclass
class LinearProgram:
    """``min c'x`` s.t. ``A[k] x (<=|==|>=) b[k]`` and ``lower <= x <= upper``.

    Defaults to ``x >= 0`` when no bounds are given.
    """

    c: np.ndarray
    A: np.ndarray = None
    b: np.ndarray = None
    senses: list = None
    lower: np.ndarray = None
    upper: np.ndarray = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        n = self.c.shape[0]
        self.A = np.zeros((0, n)) if self.A is None else np.array(self.A, dtype=float, ndmin=2).reshape(-1, n)
        m = self.A.shape[0]
        self.b = np.zeros(0) if self.b is None else np.asarray(self.b, dtype=float).reshape(-1)
        self.senses = ["<="] * m if self.senses is None else list(self.senses)
        self.lower = np.zeros(n) if self.lower is None else np.broadcast_to(np.asarray(self.lower, dtype=float), (n,)).copy()
        self.upper = np.full(n, np.inf) if self.upper is None else np.broadcast_to(np.asarray(self.upper, dtype=float), (n,)).copy()
        if self.b.shape[0] != m or len(self.senses) != m:
            raise ValueError("LP has {} rows but {} right-hand sides and {} senses".format(m, self.b.shape[0], len(self.senses)))
        if any(s not in ("<=", "==", ">=") for s in self.senses):
            raise ValueError("row senses must be '<=', '==' or '>='")
        if not (np.all(np.isfinite(self.c)) and np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.b))):
            raise ValueError("LP data must be finite")
        if np.any(self.lower == np.inf) or np.any(self.upper == -np.inf):
            raise ValueError("invalid variable bounds")

    @property
    def n(self):
        return self.c.shape[0]

    @property
    def m(self):
        return self.A.shape[0]


StandardFormLP = LinearProgram


def affine_rows(constraints, dim):
    """Stack affine constraints into ``(A_ub, b_ub, A_eq, b_eq)`` and row maps.

    The row maps list, for each constraint, the indices of its rows in the
    inequality or equality block.
    """
    ub, eq, row_map = [], [], []
    n_ub = n_eq = 0
    for c in constraints:
        if not c.is_affine:
            raise ValueError("expected affine constraints, got {}".format(c.kind))
        if c.input_dim != dim:
            raise ValueError("constraint dimension {} does not match {}".format(c.input_dim, dim))
        c = c.canonical()
        M, q = c.function.M, c.function.q
        k = M.shape[0]
        if c.is_equality:
            eq.append((M, -q))
            row_map.append(("eq", list(range(n_eq, n_eq + k))))
            n_eq += k
        else:
            ub.append((M, -q))
            row_map.append(("ub", list(range(n_ub, n_ub + k))))
            n_ub += k
    A_ub = np.vstack([m for m, _ in ub]) if ub else np.zeros((0, dim))
    b_ub = np.concatenate([b for _, b in ub]) if ub else np.zeros(0)
    A_eq = np.vstack([m for m, _ in eq]) if eq else np.zeros((0, dim))
    b_eq = np.concatenate([b for _, b in eq]) if eq else np.zeros(0)
    return A_ub, b_ub, A_eq, b_eq, row_map


def constraint_duals(row_map, lam_ub, nu_eq):
    """Per-constraint dual vectors from block multipliers."""
    out = []
    for block, rows in row_map:
        src = lam_ub if block == "ub" else nu_eq
        out.append(np.asarray(src)[rows] if len(rows) != 1 else float(np.asarray(src)[rows[0]]))
    return out
