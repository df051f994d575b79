"""Synthetic instances: logistic classification, hard-margin SVM, microgrid."""

from dataclasses import dataclass

import numpy as np

from ..functions import Affine, SquaredNorm, Sum, Variable, logistic_loss_term
from ..problem import CommonCostLocal, ConstraintCoupledLocal, CostCoupledLocal
from ..solvers import OPTIMAL, LinearProgram, simplex
from ..utils import agent_rng, box_muller, splitmix64

MEAN_POS = np.array([0.0, 0.0])
MEAN_NEG = np.array([3.0, 2.0])
M_RANGE = (4, 10)
SVM_VARIANCE = 0.2
MAX_REDRAWS = 100


class InstanceError(ValueError):
    pass


@dataclass
class ClassificationData:
    points: np.ndarray  # (m_i, 2)
    labels: np.ndarray  # (m_i,) entries in {-1, 1}
    C: float = 10.0

    @property
    def m(self):
        return self.labels.shape[0]


def _attempt_seed(seed, attempt):
    return seed if attempt == 0 else splitmix64((int(seed) << 20) ^ attempt)


def _draw_classification(N, seed, variance, C):
    out = []
    for i in range(N):
        rng = agent_rng(seed, i)
        m = int(rng.integers(M_RANGE[0], M_RANGE[1] + 1))
        labels = np.where(rng.random(m) < 0.5, 1.0, -1.0)
        noise = box_muller(rng, 2 * m).reshape(m, 2) * np.sqrt(variance)
        means = np.where(labels[:, None] > 0, MEAN_POS, MEAN_NEG)
        out.append(ClassificationData(means + noise, labels, C))
    return out


def gen_classification(N, seed=0, C=10.0, variance=1.0):
    """Per-agent Gaussian clusters; label 1 around (0,0), label -1 around (3,2).

    Agent ``i`` draws from its own stream ``agent_rng(seed, i)``. If the
    pooled labels miss a class the whole instance is redrawn from a derived
    seed.
    """
    if N < 1:
        raise InstanceError("need at least one agent")
    for attempt in range(MAX_REDRAWS):
        data = _draw_classification(N, _attempt_seed(seed, attempt), variance, C)
        labels = np.concatenate([d.labels for d in data])
        if np.any(labels > 0) and np.any(labels < 0):
            return data
    raise InstanceError("could not draw both labels in {} attempts".format(MAX_REDRAWS))


def separable(points, labels):
    """LP feasibility of ``l_j (w'p_j + b) >= 1`` for all ``j``."""
    A = -labels[:, None] * np.hstack([points, np.ones((len(labels), 1))])
    lp = LinearProgram(np.zeros(points.shape[1] + 1), A, -np.ones(len(labels)), ["<="] * len(labels),
                       lower=-np.inf, upper=np.inf)
    return simplex(lp).status == OPTIMAL


def gen_svm(N, seed=0):
    """Like :func:`gen_classification` with covariance ``0.2 I``, redrawn until separable."""
    for attempt in range(MAX_REDRAWS):
        data = gen_classification(N, _attempt_seed(seed, attempt), variance=SVM_VARIANCE)
        P, L = pool(data)
        if separable(P, L):
            return data
    raise InstanceError("no separable draw in {} attempts".format(MAX_REDRAWS))


def pool(data):
    return np.vstack([d.points for d in data]), np.concatenate([d.labels for d in data])


def local_logistic_objective(data_i, N, C=None):
    """``sum_j log(1 + exp(-l_j (w'p_j + b))) + C/(2N) ||w||^2`` over ``(w, b)``."""
    C = data_i.C if C is None else C
    d = data_i.points.shape[1]
    z = Variable(d + 1)
    terms = [logistic_loss_term(p, l) for p, l in zip(data_i.points, data_i.labels)]
    terms.append(C / (2.0 * N) * SquaredNorm(z[:d]))
    return Sum(terms)


def logistic_problems(data):
    N = len(data)
    return [CostCoupledLocal(local_logistic_objective(d, N)) for d in data]


def svm_objective(d=2):
    z = Variable(d + 1)
    return 0.5 * SquaredNorm(z[:d])


def svm_constraints(data_i):
    """One affine constraint ``l (w'p + b) >= 1`` per local point."""
    d = data_i.points.shape[1]
    z = Variable(d + 1)
    return [l * (Affine(np.append(p, 1.0)[None, :]).compose(z)) >= 1.0
            for p, l in zip(data_i.points, data_i.labels)]


def svm_problems(data):
    f = svm_objective(data[0].points.shape[1])  # one shared object
    return [CommonCostLocal(f, svm_constraints(d)) for d in data]


def svm_violation(points, labels, w, b):
    """``phi = 1 - min_j l_j (w'p_j + b)``: positive iff some margin constraint fails."""
    margins = labels * (np.asarray(points) @ np.asarray(w) + b)
    return float(1.0 - np.min(margins))


# -- microgrid ---------------------------------------------------------------

@dataclass
class MicrogridData:
    """Scalar linear dynamics ``x(k+1) = A x(k) + B u(k)`` with stage cost ``-c u(k)``.

    Coupling per step ``k = 0..S-1``: ``C x(k) + D u(k) <= h_k / N`` summed over agents.
    """

    A: float
    B: float
    C: float
    D: float
    x0: float
    S: int
    u_min: float
    u_max: float
    c: float
    h: np.ndarray
    N: int

    def to_tensors(self):
        head = np.array([self.A, self.B, self.C, self.D, self.x0, self.S, self.u_min, self.u_max, self.c, self.N],
                        dtype=float)
        return [head, np.asarray(self.h, dtype=float)]

    @classmethod
    def from_tensors(cls, tensors):
        h = np.asarray(tensors[0], dtype=float)
        A, B, C, D, x0, S, u_min, u_max, c, N = h
        return cls(float(A), float(B), float(C), float(D), float(x0), int(S), float(u_min), float(u_max),
                   float(c), np.array(tensors[1], dtype=float), int(N))


def gen_microgrid(N, S=8, seed=0, budget=None):
    """Per-agent draws: ``A in [0.8, 1]``, ``x0 in [0, 1]``, ``c in [1, 2]``; ``B = D = 1``, ``C = 0``.

    ``budget`` sets every ``h_k``; the default is ``0.6 N``.
    """
    if N < 1 or S < 1:
        raise InstanceError("need N >= 1 and S >= 1")
    h = np.full(S, 0.6 * N if budget is None else float(budget))
    out = []
    for i in range(N):
        rng = agent_rng(seed, i)
        A = 0.8 + 0.2 * rng.random()
        x0 = rng.random()
        c = 1.0 + rng.random()
        out.append(MicrogridData(A, 1.0, 0.0, 1.0, x0, S, 0.0, 1.0, c, h.copy(), N))
    return out


def local_microgrid_problem(data_i):
    """Decision vector ``(x(1..S), u(0..S-1))`` of length ``2S``."""
    S = data_i.S
    z = Variable(2 * S)
    X = np.zeros((S, 2 * S))
    U = np.zeros((S, 2 * S))
    X[:, :S] = np.eye(S)
    U[:, S:] = np.eye(S)
    # x(k) for k = 0..S-1 as an affine map (x(0) is a constant)
    X_prev = np.zeros((S, 2 * S))
    X_prev[1:, :S - 1] = np.eye(S - 1)
    x_prev_const = np.zeros(S)
    x_prev_const[0] = data_i.x0
    state_prev = Affine(X_prev, x_prev_const).compose(z)
    state = Affine(X).compose(z)
    u = Affine(U).compose(z)
    dynamics = state - data_i.A * state_prev - data_i.B * u == 0.0
    bounds = [u >= data_i.u_min, u <= data_i.u_max]
    cost = Affine(-data_i.c * U.sum(axis=0)[None, :])
    coupling = data_i.C * state_prev + data_i.D * u - data_i.h / data_i.N
    return ConstraintCoupledLocal(cost, [dynamics] + bounds, coupling)


def microgrid_problems(data):
    return [local_microgrid_problem(d) for d in data]
