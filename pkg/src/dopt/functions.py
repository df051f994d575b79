"""
Convex function algebra with exact gradients.

Every expression is a function of one root variable ``x`` of dimension
``input_dim``. Affine maps are always folded into a single :class:`Affine`
node, so nonlinear nodes only ever wrap an affine argument::

    x = Variable(2)
    f = SquaredNorm(x - 1) + 0.5 * Logistic(x @ [1, 2])
    constraints = [x >= -1, x <= 1]
"""

import numbers

import numpy as np


class ExpressionError(ValueError):
    pass


def _as_vector(x, dim):
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != dim:
        raise ExpressionError("expected a vector of dimension {}, got {}".format(dim, x.shape[0]))
    return x


class Expression:
    """Base class. Subclasses define ``eval``, ``subgradient`` and metadata."""

    # make numpy defer to our reflected operators (``A @ x``, ``c * x``)
    __array_ufunc__ = None

    input_dim = None
    output_dim = 1
    is_affine = False

    def __call__(self, x):
        return self.eval(x)

    def eval(self, x):
        raise NotImplementedError

    def subgradient(self, x):
        raise NotImplementedError

    def quadratic_coefficients(self):
        """Return ``(P, q, r)`` with ``f(x) = x'Px/2 + q'x + r``, or None."""
        return None

    def structural_key(self):
        raise NotImplementedError

    def _check_scalar(self):
        if self.output_dim != 1:
            raise ExpressionError("operation needs a scalar expression, output dimension is {}".format(self.output_dim))

    # -- algebra ---------------------------------------------------------
    def __add__(self, other):
        other = _lift(other, self.input_dim, self.output_dim)
        if other is NotImplemented:
            return other
        return Sum([self, other])

    __radd__ = __add__

    def __sub__(self, other):
        other = _lift(other, self.input_dim, self.output_dim)
        if other is NotImplemented:
            return other
        return Sum([self, -other])

    def __rsub__(self, other):
        other = _lift(other, self.input_dim, self.output_dim)
        if other is NotImplemented:
            return other
        return Sum([other, -self])

    def __neg__(self):
        return self * -1.0

    def __mul__(self, c):
        if not isinstance(c, numbers.Real):
            return NotImplemented
        return Scale(float(c), self)

    __rmul__ = __mul__

    def __truediv__(self, c):
        if not isinstance(c, numbers.Real):
            return NotImplemented
        return self * (1.0 / c)

    # -- constraints -----------------------------------------------------
    def __le__(self, other):
        return Constraint(self - other, "<=")

    def __ge__(self, other):
        return Constraint(self - other, ">=")

    def __eq__(self, other):
        return Constraint(self - other, "==")

    __hash__ = object.__hash__


def _lift(other, input_dim, output_dim):
    """Turn numbers/arrays into constant affine expressions."""
    if isinstance(other, Expression):
        if other.input_dim != input_dim:
            raise ExpressionError("expressions over different variables ({} vs {})".format(input_dim, other.input_dim))
        return other
    if isinstance(other, (numbers.Real, list, tuple, np.ndarray)):
        q = np.asarray(other, dtype=float).reshape(-1)
        if q.shape[0] == 1 and output_dim > 1:
            q = np.full(output_dim, q[0])
        return Affine(np.zeros((q.shape[0], input_dim)), q)
    return NotImplemented


class Affine(Expression):
    """``M @ x + q``."""

    is_affine = True

    def __init__(self, M, q=None):
        M = np.array(M, dtype=float, ndmin=2)
        self.M = M
        self.q = np.zeros(M.shape[0]) if q is None else np.asarray(q, dtype=float).reshape(-1).copy()
        if self.q.shape[0] != M.shape[0]:
            raise ExpressionError("offset length {} does not match {} rows".format(self.q.shape[0], M.shape[0]))
        self.input_dim = M.shape[1]
        self.output_dim = M.shape[0]

    def eval(self, x):
        v = self.M @ _as_vector(x, self.input_dim) + self.q
        return float(v[0]) if self.output_dim == 1 else v

    def jacobian(self, x=None):
        return self.M

    def subgradient(self, x):
        self._check_scalar()
        _as_vector(x, self.input_dim)
        return self.M[0].copy()

    def quadratic_coefficients(self):
        if self.output_dim != 1:
            return None
        return np.zeros((self.input_dim, self.input_dim)), self.M[0].copy(), float(self.q[0])

    def structural_key(self):
        return ("affine", self.M.tobytes(), self.M.shape, self.q.tobytes())

    def compose(self, inner):
        """``self(inner(x))`` for an affine ``inner``."""
        return Affine(self.M @ inner.M, self.M @ inner.q + self.q)

    def __mul__(self, c):
        if not isinstance(c, numbers.Real):
            return NotImplemented
        return Affine(c * self.M, c * self.q)

    __rmul__ = __mul__

    def __neg__(self):
        return Affine(-self.M, -self.q)

    def __rmatmul__(self, A):
        A = np.array(A, dtype=float, ndmin=2)
        return Affine(A @ self.M, A @ self.q)

    def __matmul__(self, v):
        # x @ v with v a vector gives the scalar v'x
        v = np.asarray(v, dtype=float).reshape(-1)
        return Affine(v[None, :] @ self.M, v @ self.q)

    def __getitem__(self, idx):
        return Affine(self.M[idx].reshape(-1, self.input_dim), np.atleast_1d(self.q[idx]))

    def __repr__(self):
        return "Affine(out={}, in={})".format(self.output_dim, self.input_dim)


class Variable(Affine):
    """The root optimization variable (identity map)."""

    def __init__(self, dim):
        if int(dim) < 1:
            raise ExpressionError("variable dimension must be positive")
        super().__init__(np.eye(int(dim)), np.zeros(int(dim)))

    def __repr__(self):
        return "Variable({})".format(self.input_dim)


def Constant(value, input_dim):
    """Constant expression over a variable of dimension ``input_dim``."""
    q = np.atleast_1d(np.asarray(value, dtype=float)).reshape(-1)
    return Affine(np.zeros((q.shape[0], input_dim)), q)


def _require_affine(inner, scalar=False):
    if not isinstance(inner, Affine):
        raise ExpressionError("argument must be affine, got {!r}".format(inner))
    if scalar and inner.output_dim != 1:
        raise ExpressionError("argument must be scalar, output dimension is {}".format(inner.output_dim))
    return inner


class QuadraticForm(Expression):
    """``u'Pu/2 + q'u + r`` with ``u`` an affine expression, ``P`` symmetric PSD."""

    def __init__(self, inner, P, q=None, r=0.0):
        self.inner = _require_affine(inner)
        k = self.inner.output_dim
        P = np.array(P, dtype=float, ndmin=2)
        if P.shape != (k, k):
            raise ExpressionError("P must be {0}x{0}, got {1}".format(k, P.shape))
        if np.max(np.abs(P - P.T), initial=0.0) > 1e-12:
            raise ExpressionError("P must be symmetric")
        if k and np.linalg.eigvalsh(P).min() < -1e-10:
            raise ExpressionError("P must be positive semidefinite")
        self.P = P
        self.q = np.zeros(k) if q is None else np.asarray(q, dtype=float).reshape(-1)
        self.r = float(r)
        self.input_dim = self.inner.input_dim

    def eval(self, x):
        u = self.inner.M @ _as_vector(x, self.input_dim) + self.inner.q
        return float(0.5 * u @ self.P @ u + self.q @ u + self.r)

    def subgradient(self, x):
        u = self.inner.M @ _as_vector(x, self.input_dim) + self.inner.q
        return self.inner.M.T @ (self.P @ u + self.q)

    def quadratic_coefficients(self):
        M, c = self.inner.M, self.inner.q
        return (M.T @ self.P @ M,
                M.T @ (self.P @ c + self.q),
                float(0.5 * c @ self.P @ c + self.q @ c + self.r))

    def structural_key(self):
        return ("quad", self.inner.structural_key(), self.P.tobytes(), self.q.tobytes(), self.r)


class SquaredNorm(Expression):
    """``||u||^2`` for an affine ``u``."""

    def __init__(self, inner):
        self.inner = _require_affine(inner)
        self.input_dim = self.inner.input_dim

    def eval(self, x):
        u = self.inner.M @ _as_vector(x, self.input_dim) + self.inner.q
        return float(u @ u)

    def subgradient(self, x):
        u = self.inner.M @ _as_vector(x, self.input_dim) + self.inner.q
        return 2.0 * (self.inner.M.T @ u)

    def quadratic_coefficients(self):
        M, c = self.inner.M, self.inner.q
        return 2.0 * M.T @ M, 2.0 * M.T @ c, float(c @ c)

    def structural_key(self):
        return ("sqnorm", self.inner.structural_key())


def _sigmoid(z):
    # numerically stable on both tails
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))


class Logistic(Expression):
    """``log(1 + exp(u))`` for a scalar affine ``u``."""

    def __init__(self, inner):
        self.inner = _require_affine(inner, scalar=True)
        self.input_dim = self.inner.input_dim

    def eval(self, x):
        u = self.inner.M[0] @ _as_vector(x, self.input_dim) + self.inner.q[0]
        return float(np.logaddexp(0.0, u))

    def subgradient(self, x):
        u = self.inner.M[0] @ _as_vector(x, self.input_dim) + self.inner.q[0]
        return float(_sigmoid(u)) * self.inner.M[0]

    def structural_key(self):
        return ("logistic", self.inner.structural_key())


class Scale(Expression):
    """``c * f`` with ``c >= 0`` (negative scaling would break convexity)."""

    def __new__(cls, c, inner):
        if isinstance(inner, Affine):
            return Affine(c * inner.M, c * inner.q)
        return super().__new__(cls)

    def __init__(self, c, inner):
        if c < 0:
            raise ExpressionError("negative scaling of a non-affine expression is not convex")
        self.c = float(c)
        self.inner = inner
        self.input_dim = inner.input_dim
        self.output_dim = inner.output_dim

    def eval(self, x):
        return self.c * self.inner.eval(x)

    def subgradient(self, x):
        return self.c * self.inner.subgradient(x)

    def quadratic_coefficients(self):
        inner = self.inner.quadratic_coefficients()
        if inner is None:
            return None
        P, q, r = inner
        return self.c * P, self.c * q, self.c * r

    def structural_key(self):
        return ("scale", self.c, self.inner.structural_key())


class Sum(Expression):
    """Sum of expressions; affine terms are folded together.

    Logistic terms are stacked into one matrix so large loss sums evaluate
    in a single vectorized pass.
    """

    def __new__(cls, terms):
        terms = list(terms)
        if terms and all(isinstance(t, Affine) for t in terms):
            return Affine(sum(t.M for t in terms), sum(t.q for t in terms))
        return super().__new__(cls)

    def __init__(self, terms):
        flat = []
        for t in terms:
            flat.extend(t.terms if isinstance(t, Sum) else [t])
        if not flat:
            raise ExpressionError("empty sum")
        dims = {t.input_dim for t in flat}
        if len(dims) != 1:
            raise ExpressionError("sum over different variables: {}".format(sorted(dims)))
        outs = {t.output_dim for t in flat}
        if len(outs) != 1:
            raise ExpressionError("sum of mismatched output dimensions: {}".format(sorted(outs)))
        affine = [t for t in flat if isinstance(t, Affine)]
        rest = [t for t in flat if not isinstance(t, Affine)]
        if len(affine) > 1:
            affine = [Affine(sum(t.M for t in affine), sum(t.q for t in affine))]
        self.terms = rest + affine
        self.input_dim = dims.pop()
        self.output_dim = outs.pop()
        logistic = [t for t in self.terms if isinstance(t, Logistic)]
        self._others = [t for t in self.terms if not isinstance(t, Logistic)]
        if logistic:
            self._lM = np.vstack([t.inner.M for t in logistic])
            self._lq = np.concatenate([t.inner.q for t in logistic])
        else:
            self._lM = None

    def eval(self, x):
        x = _as_vector(x, self.input_dim)
        total = 0.0
        if self._lM is not None:
            total += float(np.sum(np.logaddexp(0.0, self._lM @ x + self._lq)))
        for t in self._others:
            total = total + t.eval(x)
        return total

    def subgradient(self, x):
        x = _as_vector(x, self.input_dim)
        g = np.zeros(self.input_dim)
        if self._lM is not None:
            g += self._lM.T @ _sigmoid(self._lM @ x + self._lq)
        for t in self._others:
            g += t.subgradient(x)
        return g

    def quadratic_coefficients(self):
        parts = [t.quadratic_coefficients() for t in self.terms]
        if any(p is None for p in parts):
            return None
        return (sum(p[0] for p in parts), sum(p[1] for p in parts), sum(p[2] for p in parts))

    def structural_key(self):
        return ("sum",) + tuple(t.structural_key() for t in self.terms)


class Constraint:
    """``g(x) <sense> 0`` with ``sense`` one of ``<=``, ``>=``, ``==``.

    ``x >= -1`` over ``Variable(2)`` is stored as ``(x + 1) >= 0``; call
    :meth:`canonical` (or :func:`canonicalize`) to get ``-x - 1 <= 0``.
    """

    SENSES = ("<=", ">=", "==")

    def __init__(self, function, sense="<="):
        if sense not in self.SENSES:
            raise ExpressionError("unknown constraint sense {!r}".format(sense))
        if not isinstance(function, Expression):
            raise ExpressionError("constraint function must be an Expression")
        self.function = function
        self.sense = sense

    @property
    def input_dim(self):
        return self.function.input_dim

    @property
    def is_affine(self):
        return self.function.is_affine

    @property
    def is_equality(self):
        return self.sense == "=="

    @property
    def kind(self):
        if self.is_affine:
            return "affine_equality" if self.is_equality else "affine_inequality"
        return "convex_inequality"

    def canonical(self):
        return canonicalize(self)

    @property
    def A(self):
        c = self.canonical()
        return c.function.M

    @property
    def b(self):
        c = self.canonical()
        return -c.function.q

    def __len__(self):
        return self.function.output_dim

    def rows(self):
        """Split a multi-row affine constraint into scalar canonical rows."""
        c = self.canonical()
        if not c.is_affine:
            return [c]
        f = c.function
        return [Constraint(Affine(f.M[k:k + 1], f.q[k:k + 1]), c.sense) for k in range(f.output_dim)]

    def violation(self, x):
        """Canonical left side: ``g(x)`` for inequalities, ``|g(x)|`` for equalities."""
        c = self.canonical()
        v = np.atleast_1d(np.asarray(c.function.eval(x), dtype=float))
        return np.abs(v) if c.is_equality else v

    def max_violation(self, x):
        return float(np.max(self.violation(x)))

    def satisfied(self, x, tol=0.0):
        return bool(np.all(self.violation(x) <= tol))

    def key(self):
        """Hashable identity of a canonical affine row set (bit-exact)."""
        c = self.canonical()
        return (c.sense, c.function.structural_key())

    def __repr__(self):
        return "Constraint({} {} 0, rows={})".format(self.kind, self.sense, len(self))


def canonicalize(c):
    """Rewrite ``c`` as ``g(x) <= 0`` or ``g(x) == 0``; idempotent."""
    if c.sense == "<=":
        return c
    if c.sense == "==":
        if not c.is_affine:
            raise ExpressionError("nonlinear equality constraints are not convex")
        return c
    if not c.is_affine:
        raise ExpressionError("'convex >= ...' is not a convex constraint")
    return Constraint(-c.function, "<=")


def logistic_loss_term(point, label):
    """``log(1 + exp(-label * (w'p + b)))`` over the stacked variable ``(w, b)``."""
    if label not in (-1, 1):
        raise ExpressionError("labels must be -1 or +1, got {}".format(label))
    p = np.asarray(point, dtype=float).reshape(-1)
    row = -float(label) * np.append(p, 1.0)
    return Logistic(Affine(row[None, :], [0.0]))
