"""Acceptance criteria 1-4 at the stated scales and tolerances.

Each test records its outcome; ``conftest.pytest_terminal_summary`` prints
one PASS/FAIL line per criterion at the end of the run.
"""

import time

import numpy as np
import pytest
from conftest import record_acceptance
from helpers import free_base_port, run_threads
from test_functions import central_diff, variants
from test_solvers import random_bounded_lp, vertex_enumeration

from dopt.algorithms import ALGORITHMS
from dopt.comms import Message, TcpTransport, decode, encode, make_roster
from dopt.experiments.drivers import make_graph, make_instance, score
from dopt.experiments.oracle import centralized_oracle
from dopt.functions import QuadraticForm, Variable
from dopt.graph import diameter, metropolis_weights, random_binomial
from dopt.problem import CostCoupledLocal
from dopt.runner import build_agents, run_inprocess
from dopt.solvers import LinearProgram, simplex

N = 10
ITERATIONS = 20_000
SEED = 0


def series(rows):
    out = {}
    for t, agent, name, value in rows:
        out.setdefault(name, {}).setdefault(agent, []).append(value)
    return {k: {a: np.array(v) for a, v in d.items()} for k, d in out.items()}


def check(criterion, name, ok, detail):
    record_acceptance(criterion, name, ok, detail)
    print("[criterion {}] {} {}: {}".format(criterion, "PASS" if ok else "FAIL", name, detail))
    assert ok, "{}: {}".format(name, detail)


def timed_run(instance, graph, algorithm, step, iterations=ITERATIONS):
    t0 = time.perf_counter()
    algs = run_inprocess(graph, instance.problems, algorithm, iterations, step, global_seed=SEED)
    elapsed = time.perf_counter() - t0
    rows = score(instance, {a.agent.id: a.history for a in algs})
    return algs, series(rows), elapsed


def eventually_decreasing(values, noise=1e-12):
    tail = values[-(len(values) // 10):]
    return bool(np.all(np.diff(tail) <= noise)), float(np.max(np.diff(tail)))


# -- criterion 1: logistic classification --------------------------------------------

@pytest.fixture(scope="module")
def logistic():
    inst = make_instance("logistic", N, SEED, C=10.0)
    g = make_graph(N, 0.3, SEED, undirected=True)
    gt = timed_run(inst, g, "gradient_tracking", "constant:0.001")
    sg = timed_run(inst, g, "subgradient", "diminishing:0.6")
    return {"gradient_tracking": gt, "subgradient": sg}


def test_c1_gradient_tracking_errors(logistic):
    _, s, _ = logistic["gradient_tracking"]
    ce, se = s["cost_error"]["all"][-1], s["max_solution_error"]["all"][-1]
    check(1, "gradient tracking cost error < 1e-4", ce < 1e-4, "{:.3e}".format(ce))
    check(1, "gradient tracking max solution error < 1e-3", se < 1e-3, "{:.3e}".format(se))


def test_c1_subgradient_cost_error(logistic):
    _, s, _ = logistic["subgradient"]
    ce = s["cost_error"]["all"][-1]
    check(1, "subgradient cost error < 1e-2", ce < 1e-2, "{:.3e}".format(ce))


@pytest.mark.parametrize("algorithm", ["gradient_tracking", "subgradient"])
@pytest.mark.parametrize("metric", ["cost_error", "max_solution_error"])
def test_c1_eventually_decreasing(logistic, algorithm, metric):
    _, s, _ = logistic[algorithm]
    ok, worst = eventually_decreasing(s[metric]["all"])
    check(1, "{} {} monotone over last 10% of rounds".format(algorithm, metric), ok,
          "largest increase {:.2e}".format(worst))


def test_c1_runtime(logistic):
    total = sum(v[2] for v in logistic.values())
    check(1, "runtime <= 5 min", total <= 300, "{:.1f} s".format(total))


# -- criterion 2: SVM constraints consensus -------------------------------------------

@pytest.fixture(scope="module")
def svm():
    inst = make_instance("svm", N, SEED)
    g = make_graph(N, 0.3, SEED, undirected=False)
    D = diameter(g)
    algs, s, elapsed = timed_run(inst, g, "constraints_consensus", None, iterations=2 * D + 2 + 5)
    return inst, g, D, s, elapsed


def test_c2_finite_time_agreement(svm):
    _, g, D, s, _ = svm
    assert not g.undirected
    agree = s["agreement"]["all"]
    cost = s["max_cost_error"]["all"]
    done = np.flatnonzero((agree == 1.0) & (cost <= 1e-8))
    first = int(done[0]) if done.size else None
    ok = first is not None and first <= 2 * D + 2 and np.all(agree[first:] == 1) and np.all(cost[first:] <= 1e-8)
    check(2, "bases agree and costs within 1e-8 of the optimum by round 2D+2",
          ok, "reached at round {} (D = {}, bound {})".format(first, D, 2 * D + 2))


def test_c2_final_phi(svm):
    _, _, _, s, _ = svm
    phis = np.array([s["phi"][i][-1] for i in range(N)])
    check(2, "final phi_i <= 1e-9 for all agents", np.all(phis <= 1e-9), "max {:.2e}".format(phis.max()))


def test_c2_runtime(svm):
    check(2, "runtime <= 1 min", svm[4] <= 60, "{:.1f} s".format(svm[4]))


# -- criterion 3: microgrid -------------------------------------------------------------

@pytest.fixture(scope="module")
def microgrid():
    inst = make_instance("microgrid", N, SEED, S=8)
    g = make_graph(N, 0.3, SEED, undirected=True)
    ds = timed_run(inst, g, "dual_subgradient", "diminishing:0.6")
    pd = timed_run(inst, g, "primal_decomposition", "diminishing:0.6")
    return {"dual_subgradient": ds, "primal_decomposition": pd}


def test_c3_dual_subgradient_cost(microgrid):
    ce = microgrid["dual_subgradient"][1]["cost_error"]["all"][-1]
    check(3, "dual subgradient cost error < 5e-2", ce < 5e-2, "{:.3e}".format(ce))


def test_c3_dual_subgradient_coupling(microgrid):
    c = microgrid["dual_subgradient"][1]["coupling"]["all"][-1]
    check(3, "dual subgradient final coupling <= 1e-3", c <= 1e-3, "{:.3e}".format(c))


def test_c3_dual_subgradient_first_feasible(microgrid):
    c = microgrid["dual_subgradient"][1]["coupling"]["all"]
    hits = np.flatnonzero(c <= 1e-3)
    first = int(hits[0]) if hits.size else None
    check(3, "dual subgradient first feasible round (coupling <= 1e-3) < 10000",
          first is not None and first < 10_000, "first at round {}".format(first))


def test_c3_primal_decomposition_always_feasible(microgrid):
    c = microgrid["primal_decomposition"][1]["coupling"]["all"]
    bad = np.flatnonzero(c > 1e-9)
    check(3, "primal decomposition coupling <= 1e-9 at every round", bad.size == 0,
          "max {:.3e}; violated in {} of {} rounds".format(c.max(), bad.size, c.size))


def test_c3_primal_decomposition_drift(microgrid):
    d = microgrid["primal_decomposition"][1]["allocation_drift"]["all"].max()
    check(3, "allocation-sum drift < 1e-10", d < 1e-10, "{:.2e}".format(d))


def test_c3_runtime(microgrid):
    total = sum(v[2] for v in microgrid.values())
    check(3, "runtime <= 10 min", total <= 600, "{:.1f} s".format(total))


# -- criterion 4: property suites ---------------------------------------------------------

def test_c4_gradients():
    rng = np.random.default_rng(4)
    worst = 0.0
    for f in variants(rng).values():
        for _ in range(20):
            x = rng.normal(size=3)
            worst = max(worst, float(np.max(np.abs(f.subgradient(x) - central_diff(f, x)))))
    check(4, "gradient vs finite differences < 1e-6 on every variant", worst < 1e-6, "max {:.2e}".format(worst))


def test_c4_simplex_vertex_enumeration():
    rng = np.random.default_rng(44)
    worst = 0.0
    for _ in range(50):
        c, A, b, lo, hi = random_bounded_lp(rng)
        n = c.shape[0]
        sol = simplex(LinearProgram(c, A, b, lower=lo, upper=hi))
        G = np.vstack([A, np.eye(n), -np.eye(n)])
        h = np.concatenate([b, np.full(n, hi), np.full(n, -lo)])
        worst = max(worst, abs(sol.objective_value - vertex_enumeration(c, G, h)))
    check(4, "simplex matches vertex enumeration to 1e-9 on 50 LPs", worst <= 1e-9, "max {:.2e}".format(worst))


def test_c4_doubly_stochastic():
    worst = 0.0
    for seed in range(30):
        A = metropolis_weights(random_binomial(2 + seed % 19, 0.3, seed))
        worst = max(worst, np.abs(A.sum(0) - 1).max(), np.abs(A.sum(1) - 1).max())
    check(4, "Metropolis weights doubly stochastic to 1e-12", worst < 1e-12, "max {:.2e}".format(worst))


def _quadratics(n, seed):
    rng = np.random.default_rng(seed)
    x = Variable(2)
    out = []
    for _ in range(n):
        B = rng.normal(size=(2, 2))
        out.append(CostCoupledLocal(QuadraticForm(x, B @ B.T + 0.1 * np.eye(2), rng.normal(size=2))))
    return out


def test_c4_tracker_identity():
    local = _quadratics(8, 1)
    algs = run_inprocess(random_binomial(8, 0.4, 1), local, "gradient_tracking", 200, "constant:0.02")
    worst = 0.0
    for t in range(201):
        s = sum(a.history[t]["aux"]["s"] for a in algs)
        g = sum(p.objective.subgradient(a.history[t]["x"]) for p, a in zip(local, algs))
        worst = max(worst, float(np.abs(s - g).max()))
    check(4, "tracker-sum identity every round to 1e-10", worst < 1e-10, "max {:.2e}".format(worst))


def test_c4_dual_nonnegative():
    inst = make_instance("microgrid", 6, 2)
    algs = run_inprocess(make_graph(6, 0.4, 2), inst.problems, "dual_subgradient", 500)
    low = min(float(h["aux"]["mu"].min()) for a in algs for h in a.history)
    check(4, "mu >= 0 at every round", low >= 0, "min {:.2e}".format(low))


def test_c4_message_roundtrip():
    rng = np.random.default_rng(0)
    ok = True
    for k in range(200):
        tensors = [rng.normal(size=tuple(rng.integers(1, 4, rng.integers(0, 3)))) for _ in range(rng.integers(0, 4))]
        data = encode(Message(int(rng.integers(0, 2**32)), k, 0, tensors))
        ok &= encode(decode(data)) == data
    check(4, "message encode/decode byte-identical", ok, "200 random messages")


def test_c4_inproc_tcp_bit_identical():
    inst = make_instance("logistic", 5, 3)
    g = make_graph(5, 0.4, 3)
    a = run_inprocess(g, inst.problems, "gradient_tracking", 200, "constant:0.001")
    roster = make_roster(5, base_port=free_base_port(5))
    transports = [TcpTransport(i, roster, timeout=20) for i in range(5)]
    try:
        algs = [ALGORITHMS["gradient_tracking"](ag, stepsize="constant:0.001")
                for ag in build_agents(g, inst.problems, transports)]
        run_threads([lambda al=al: al.run(200) for al in algs])
    finally:
        for t in transports:
            t.close()
    same = all(h["x"].tobytes() == k["x"].tobytes() and h["aux"]["s"].tobytes() == k["aux"]["s"].tobytes()
               for p, q in zip(a, algs) for h, k in zip(p.history, q.history))
    check(4, "in-process vs TCP histories bit-identical", same, "5 agents x 201 records")
