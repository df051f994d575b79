import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dopt.functions import Affine, ExpressionError, Logistic, QuadraticForm, SquaredNorm, Sum, Variable
from dopt.problem import (
    CommonCostLocal,
    ConstraintCoupledLocal,
    CostCoupledLocal,
    Problem,
    project,
)
from dopt.solvers import INFEASIBLE, OPTIMAL, SolverOptions


def box(x, lo, hi):
    return [x >= lo, x <= hi]


def test_box_listing_problem():
    x = Variable(2)
    sol = Problem(SquaredNorm(x), box(x, -1, 1)).solve()
    assert sol.status == OPTIMAL
    np.testing.assert_allclose(sol.x, [0, 0], atol=1e-12)
    assert sol.objective_value == pytest.approx(0, abs=1e-12)


def test_small_lp_matches_vertex_enumeration():
    x = Variable(2)
    obj = Affine([[1.0, 2.0]])
    cons = box(x, 0, 1) + [Affine([[1.0, 1.0]]) >= 1]
    vertices = [np.array(v, float) for v in [(0, 1), (1, 0), (1, 1)]]  # feasible vertices of the polygon
    best = min(vertices, key=lambda v: obj.eval(v))
    sol = Problem(obj, cons).solve()
    np.testing.assert_allclose(sol.x, best, atol=1e-12)
    assert sol.objective_value == pytest.approx(1.0)


def test_one_dimensional_svm():
    z = Variable(2)  # (w, b)
    obj = QuadraticForm(z, np.diag([1.0, 0.0]))
    cons = [Affine([[1.0, 1.0]]) >= 1, Affine([[1.0, -1.0]]) >= 1]  # w*1+b >= 1, -(w*(-1)+b) >= 1
    sol = Problem(obj, cons).solve()
    np.testing.assert_allclose(sol.x, [1, 0], atol=1e-9)
    assert sol.objective_value == pytest.approx(0.5)
    # grid oracle over a fine mesh
    W, B = np.meshgrid(np.linspace(-3, 3, 601), np.linspace(-3, 3, 601))
    feas = (W + B >= 1) & (W - B >= 1)
    assert (0.5 * W[feas] ** 2).min() >= 0.5 - 1e-12
    np.testing.assert_allclose(sol.dual_values, [0.5, 0.5], atol=1e-9)


def test_infeasible_surfaces_in_status():
    x = Variable(1)
    assert Problem(Affine([[1.0]]), [x <= -1, x >= 1]).solve().status == INFEASIBLE
    assert Problem(SquaredNorm(x), [x <= -1, x >= 1]).solve().status == INFEASIBLE


def test_smooth_problem_via_projected_gradient():
    x = Variable(2)
    f = Sum([Logistic(Affine([[1.0, -1.0]], [0.5])), SquaredNorm(Affine(np.eye(2), [-2.0, 1.0]))])
    sol = Problem(f, box(x, -1, 1)).solve()
    assert sol.status == OPTIMAL
    assert sol.info["gradient_map"] <= 1e-8


def test_convex_nonlinear_constraint():
    x = Variable(2)
    # min -x1 s.t. ||x||^2 <= 1  -> x = (1, 0)
    sol = Problem(Affine([[-1.0, 0.0]]), [SquaredNorm(x) <= 1]).solve()
    np.testing.assert_allclose(sol.x, [1, 0], atol=1e-4)


def test_problem_validation():
    with pytest.raises(ExpressionError):
        Problem(Variable(2))
    with pytest.raises(ExpressionError):
        Problem(SquaredNorm(Variable(2)), [Variable(3) <= 1])


def test_solve_is_deterministic():
    rng = np.random.default_rng(0)
    x = Variable(3)
    P = rng.normal(size=(3, 3))
    p = Problem(QuadraticForm(x, P @ P.T + np.eye(3), rng.normal(size=3)),
                [Affine(rng.normal(size=(4, 3))) <= rng.uniform(0.1, 1, 4)])
    a, b = p.solve(), p.solve()
    assert a.x.tobytes() == b.x.tobytes()


@given(st.integers(0, 10_000))
def test_complementary_slackness(seed):
    rng = np.random.default_rng(seed)
    x = Variable(3)
    P = rng.normal(size=(3, 3))
    cons = [Affine(rng.normal(size=(1, 3))) <= float(rng.uniform(0.1, 1)) for _ in range(5)] + box(x, -2, 2)
    for obj in (QuadraticForm(x, P @ P.T + 0.1 * np.eye(3), rng.normal(size=3)), Affine(rng.normal(size=(1, 3)))):
        sol = Problem(obj, cons).solve()
        assert sol.status == OPTIMAL
        for c, d in zip(cons, sol.dual_values):
            d = np.atleast_1d(d)
            assert np.all(d >= -1e-12)
            assert np.max(np.abs(d * c.violation(sol.x))) < 1e-6


def test_projection_examples():
    x = Variable(2)
    np.testing.assert_array_equal(project(box(x, -1, 1), [2.0, -3.0]), [1, -1])
    np.testing.assert_allclose(project([Affine([[1.0, 1.0]]) <= 0], [1.0, 1.0]), [0, 0], atol=1e-12)


def _polytope(rng, d=3, m=6):
    x = Variable(d)
    A = rng.normal(size=(m, d))
    return [Affine(A) <= rng.uniform(0.5, 1.5, m)] + box(x, -2, 2)


@given(st.integers(0, 10_000))
def test_projection_variational_inequality(seed):
    rng = np.random.default_rng(seed)
    cons = _polytope(rng)
    feasible = [z for z in rng.uniform(-2, 2, size=(400, 3)) if all(c.satisfied(z) for c in cons)]
    for _ in range(20):
        p = rng.normal(size=3) * 3
        y = project(cons, p)
        assert max(c.max_violation(y) for c in cons) < 1e-8
        for z in feasible[:30]:
            assert (p - y) @ (z - y) <= 1e-8


@given(st.integers(0, 10_000))
def test_projection_idempotent_nonexpansive(seed):
    rng = np.random.default_rng(seed)
    cons = _polytope(rng)
    a, b = rng.normal(size=3) * 3, rng.normal(size=3) * 3
    pa, pb = project(cons, a), project(cons, b)
    np.testing.assert_allclose(project(cons, pa), pa, atol=1e-10)
    assert np.linalg.norm(pa - pb) <= np.linalg.norm(a - b) + 1e-10


def test_setup_wrappers():
    x = Variable(2)
    cc = CostCoupledLocal(SquaredNorm(x), box(x, -1, 1))
    assert cc.dim == 2 and cc.setup == "cost_coupled"
    cm = CommonCostLocal(SquaredNorm(x), [x >= 0])
    assert cm.objective_key() == CommonCostLocal(SquaredNorm(Variable(2))).objective_key()
    g = ConstraintCoupledLocal(Affine([[1.0, 1.0]]), box(x, 0, 1), Affine(np.ones((8, 2))))
    assert g.n_coupling == 8
    with pytest.raises(ExpressionError):
        ConstraintCoupledLocal(Affine([[1.0, 1.0]]), [], SquaredNorm(x))
    with pytest.raises(ExpressionError):
        ConstraintCoupledLocal(Affine([[1.0, 1.0]]), [], Affine(np.ones((2, 3))))


def test_solver_options_validation():
    with pytest.raises(ValueError):
        SolverOptions(feasibility_tol=0)
    with pytest.raises(ValueError):
        SolverOptions(tie_break="random")
