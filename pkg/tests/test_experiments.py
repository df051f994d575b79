import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dopt.experiments.data import (
    ClassificationData,
    gen_classification,
    gen_microgrid,
    gen_svm,
    local_logistic_objective,
    local_microgrid_problem,
    logistic_problems,
    microgrid_problems,
    pool,
    separable,
    svm_constraints,
    svm_objective,
    svm_problems,
    svm_violation,
)
from dopt.experiments.drivers import ExperimentError, check_compatible, make_instance, score
from dopt.experiments.instance import (
    InstanceFileError,
    decode_instance,
    encode_instance,
    instance_hash,
    read_instance,
    write_instance,
)
from dopt.experiments.metrics import (
    MetricsError,
    first_round,
    first_round_staying,
    read_metrics,
    write_metrics,
)
from dopt.experiments.oracle import centralized_oracle
from dopt.functions import logistic_loss_term
from dopt.graph import random_binomial
from dopt.problem import CommonCostLocal, Problem
from dopt.runner import run_inprocess
from dopt.solvers import SolverOptions


def same_data(a, b):
    return all(np.array_equal(x.points, y.points) and np.array_equal(x.labels, y.labels) for x, y in zip(a, b))


# -- classification ---------------------------------------------------------------

def test_classification_deterministic_and_bounded():
    assert same_data(gen_classification(8, 5), gen_classification(8, 5))
    assert not same_data(gen_classification(8, 5), gen_classification(8, 6))
    data = gen_classification(20, 0)
    assert all(4 <= d.m <= 10 for d in data)
    labels = np.concatenate([d.labels for d in data])
    assert set(labels) == {-1.0, 1.0}


def test_class_means():
    P, L = pool(gen_classification(1500, 11))  # about 10,500 pooled samples
    assert P.shape[0] >= 10_000
    assert np.all(np.abs(P[L > 0].mean(axis=0) - [0, 0]) < 0.1)
    assert np.all(np.abs(P[L < 0].mean(axis=0) - [3, 2]) < 0.1)


def test_local_logistic_objective_values():
    data = gen_classification(5, 2)
    f = local_logistic_objective(data[0], 5, 10.0)
    assert f.eval(np.zeros(3)) == pytest.approx(data[0].m * np.log(2))


@given(st.integers(0, 1000))
def test_sum_of_locals_equals_centralized(seed):
    data = gen_classification(6, seed)
    rng = np.random.default_rng(seed)
    P, L = pool(data)
    for _ in range(5):
        z = rng.normal(size=3) * 2
        central = sum(logistic_loss_term(p, l).eval(z) for p, l in zip(P, L)) + 10.0 / 2 * z[:2] @ z[:2]
        total = sum(q.objective.eval(z) for q in logistic_problems(data))
        assert abs(total - central) < 1e-10


def test_local_logistic_gradient():
    f = local_logistic_objective(gen_classification(3, 0)[1], 3, 10.0)
    rng = np.random.default_rng(0)
    for _ in range(10):
        z = rng.normal(size=3)
        fd = np.array([(f.eval(z + e) - f.eval(z - e)) / 2e-5 for e in np.eye(3) * 1e-5])
        assert np.max(np.abs(fd - f.subgradient(z))) < 1e-6


# -- svm ----------------------------------------------------------------------------

def test_svm_constraint_canonical_form():
    c = svm_constraints(ClassificationData(np.array([[1.0, 0.0]]), np.array([1.0])))[0].canonical()
    np.testing.assert_array_equal(c.A, [[-1, 0, -1]])
    np.testing.assert_array_equal(c.b, [-1])


def test_svm_generator_separable_and_oracle():
    data = gen_svm(10, 0)
    P, L = pool(data)
    assert separable(P, L)
    res = centralized_oracle(svm_problems(data))
    assert res.status == "optimal"
    phi = svm_violation(P, L, res.x[:2], res.x[2])
    assert phi <= 1e-9
    assert abs(phi) <= 1e-9  # some support vector is tight


def test_svm_violation_examples():
    assert svm_violation([[1.0, 0.0]], np.array([1.0]), [2.0, 0.0], 0.0) == -1.0
    assert svm_violation([[1.0, 0.0], [3.0, 2.0]], np.array([1.0, -1.0]), [0.0, 0.0], 0.0) == 1.0


def test_svm_shared_objective_object():
    problems = svm_problems(gen_svm(4, 0))
    assert all(p.objective is problems[0].objective for p in problems)


def test_svm_one_dimensional_oracle():
    data = [ClassificationData(np.array([[1.0]]), np.array([1.0])),
            ClassificationData(np.array([[-1.0]]), np.array([-1.0]))]
    f = svm_objective(1)
    res = centralized_oracle([CommonCostLocal(f, svm_constraints(d)) for d in data])
    np.testing.assert_allclose(res.x, [1, 0], atol=1e-9)
    assert res.value == pytest.approx(0.5)


# -- microgrid ----------------------------------------------------------------------

def test_microgrid_generator_ranges():
    data = gen_microgrid(10, 8, 0)
    assert all(0.8 <= d.A <= 1 and 0 <= d.x0 <= 1 and 1 <= d.c <= 2 for d in data)
    assert all(d.B == 1 and d.C == 0 and d.D == 1 and np.all(d.h == 6.0) for d in data)
    assert [d.A for d in gen_microgrid(10, 8, 0)] == [d.A for d in data]
    res = centralized_oracle(microgrid_problems(data))
    assert res.status == "optimal"


def test_microgrid_local_structure():
    d = gen_microgrid(4, 8, 1)[0]
    p = local_microgrid_problem(d)
    assert p.dim == 16 and p.n_coupling == 8
    sol = Problem(p.objective, p.constraints).solve()
    x, u = sol.x[:8], sol.x[8:]
    prev = np.concatenate([[d.x0], x[:-1]])
    assert np.max(np.abs(x - (d.A * prev + d.B * u))) < 1e-9


def test_microgrid_budget_split_identity():
    data = gen_microgrid(5, 8, 2)
    rng = np.random.default_rng(0)
    zs = [rng.uniform(0, 1, 16) for _ in data]
    total = sum(local_microgrid_problem(d).coupling.eval(z) + d.h / d.N for d, z in zip(data, zs))
    expected_left = sum(d.C * np.concatenate([[d.x0], z[:7]]) + d.D * z[8:] for d, z in zip(data, zs))
    np.testing.assert_allclose(total, expected_left, rtol=0, atol=1e-12)


def test_microgrid_loose_budget_separable():
    data = gen_microgrid(6, 8, 3, budget=6.0)
    problems = microgrid_problems(data)
    res = centralized_oracle(problems)
    per_agent = sum(Problem(p.objective, p.constraints).solve().objective_value for p in problems)
    assert res.value == pytest.approx(per_agent, abs=1e-9)


def test_microgrid_sum_of_locals_identity():
    data = gen_microgrid(4, 8, 5)
    problems = microgrid_problems(data)
    zs = [np.random.default_rng(k).uniform(0, 1, 16) for k in range(4)]
    central = -sum(d.c * z[8:].sum() for d, z in zip(data, zs))
    assert abs(sum(p.objective.eval(z) for p, z in zip(problems, zs)) - central) < 1e-10


def test_microgrid_dual_subgradient_bounded_by_oracle_dual():
    inst = make_instance("microgrid", 4, seed=1)
    mu_star = float(np.max(centralized_oracle(inst.problems).coupling_duals))
    algs = run_inprocess(random_binomial(4, 0.6, 1), inst.problems, "dual_subgradient", 300)
    mus = np.array([h["aux"]["mu"] for a in algs for h in a.history])
    assert mus.min() >= 0 and mus.max() < 10 * mu_star


# -- oracle ---------------------------------------------------------------------------

def test_logistic_oracle_large_regularization():
    data = gen_classification(5, 4, C=1e6)
    res = centralized_oracle(logistic_problems(data))
    total_m = sum(d.m for d in data)
    assert np.linalg.norm(res.x[:2]) < 1e-3
    assert res.value == pytest.approx(total_m * np.log(2), rel=1e-2)


@pytest.mark.parametrize("n,seed", [(5, 0), (6, 0), (10, 1), (20, 2)])
def test_logistic_oracle_stationary(n, seed):
    problems = make_instance("logistic", n, seed).problems
    res = centralized_oracle(problems)
    assert res.status == "optimal"
    assert np.linalg.norm(sum(p.objective.subgradient(res.x) for p in problems)) < 1e-9


# -- instance files -------------------------------------------------------------------

@pytest.mark.parametrize("experiment", ["logistic", "svm", "microgrid"])
def test_instance_roundtrip(experiment, tmp_path):
    inst = make_instance(experiment, 5, seed=3)
    digest = write_instance(tmp_path / "i.bin", experiment, inst.data)
    kind, data = read_instance(tmp_path / "i.bin")
    assert kind == experiment
    assert encode_instance(kind, data) == encode_instance(experiment, inst.data)
    assert instance_hash(kind, data) == digest


def test_instance_errors():
    blob = encode_instance("svm", gen_svm(3, 0))
    with pytest.raises(InstanceFileError):
        decode_instance(blob[:-3])
    with pytest.raises(InstanceFileError):
        decode_instance(b"")
    with pytest.raises(InstanceFileError):
        encode_instance("weather", [])


# -- metrics --------------------------------------------------------------------------

def test_metrics_roundtrip(tmp_path):
    rows = [(0, 0, "phi", 0.5), (0, "all", "max_phi", 0.5), (1, 0, "phi", 1 / 3), (1, "all", "max_phi", 1 / 3)]
    write_metrics(tmp_path / "m.csv", rows)
    m = read_metrics(tmp_path / "m.csv")
    assert m["phi"][0].tolist() == [0.5, 1 / 3]
    assert m["max_phi"]["all"].tolist() == [0.5, 1 / 3]


@pytest.mark.parametrize("text,line", [("", 1), ("round,agent,metric\n", 1), ("round,agent,metric,value\n", 2),
                                       ("round,agent,metric,value\n0,0,phi,1\n0,0,phi\n", 3),
                                       ("round,agent,metric,value\nx,0,phi,1\n", 2)])
def test_malformed_metrics_report_line(text, line, tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(MetricsError, match=":{}:".format(line)):
        read_metrics(p)


def test_first_round_helpers():
    v = np.array([3.0, 0.5, 2.0, 0.1, 0.05])
    assert first_round(v, lambda a: a < 1) == 1
    assert first_round_staying(v, lambda a: a < 1) == 3
    assert first_round(v, lambda a: a < 0) is None
    assert first_round_staying(np.array([0.0, 2.0]), lambda a: a < 1) is None


def test_cost_error_nonnegative_and_phi_nonincreasing_after_agreement():
    inst = make_instance("svm", 6, seed=2)
    g = random_binomial(6, 0.3, 2, undirected=False)
    algs = run_inprocess(g, inst.problems, "constraints_consensus", 12)
    rows = score(inst, {a.agent.id: a.history for a in algs})
    agree = [v for t, a, m, v in rows if m == "agreement"]
    phi = np.array([v for t, a, m, v in rows if m == "max_phi"])
    t0 = agree.index(1.0)
    assert np.all(np.diff(phi[t0:]) <= 1e-12)
    assert all(v >= 0 for t, a, m, v in rows if m.endswith("cost_error"))


def test_compatibility_checks():
    check_compatible("svm", "constraints_consensus")
    for exp, alg in [("svm", "subgradient"), ("logistic", "dual_subgradient"), ("microgrid", "gradient_tracking"),
                     ("weather", "subgradient"), ("svm", "newton")]:
        with pytest.raises(ExperimentError):
            check_compatible(exp, alg)
