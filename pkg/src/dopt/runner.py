"""Launch one algorithm instance per agent over a shared in-process network."""

import threading

from . import comms
from .agent import Agent
from .algorithms import ALGORITHMS
from .graph import GraphError, is_strongly_connected, weight_matrix


def build_agents(graph, local_data, transports=None, weights=None, global_seed=0):
    if len(local_data) != graph.n:
        raise ValueError("got local data for {} agents, graph has {}".format(len(local_data), graph.n))
    W = weight_matrix(graph) if weights is None else weights
    transports = transports or [None] * graph.n
    return [Agent.from_graph(graph, W, i, local_data=local_data[i], transport=transports[i],
                             global_seed=global_seed) for i in range(graph.n)]


def run_inprocess(graph, local_data, algorithm, iterations, stepsize=None, global_seed=0, weights=None,
                  timeout=comms.DEFAULT_TIMEOUT, initial_conditions=None, **algorithm_kwargs):
    """Run ``algorithm`` (class or registered name) on every agent, one thread each.

    Returns the list of per-agent algorithm instances after the run; their
    ``history`` attributes hold the iteration logs. The first agent failure
    aborts the network and is re-raised here.
    """
    if not is_strongly_connected(graph):
        raise GraphError("communication graph is not strongly connected")
    cls = ALGORITHMS[algorithm] if isinstance(algorithm, str) else algorithm
    net = comms.InProcessNetwork(graph.n, timeout=timeout)
    agents = build_agents(graph, local_data, [net.transport(i) for i in range(graph.n)], weights, global_seed)
    algs = [cls(a, initial_condition=None if initial_conditions is None else initial_conditions[a.id],
                stepsize=stepsize, **algorithm_kwargs) for a in agents]
    errors = [None] * graph.n

    def work(k):
        try:
            algs[k].run(iterations=iterations)
        except BaseException as exc:  # noqa: BLE001 - re-raised on the driver thread
            errors[k] = exc
            net.abort(comms.NetworkAborted("agent {} failed: {}".format(k, exc)))

    if graph.n == 1:
        work(0)
    else:
        threads = [threading.Thread(target=work, args=(k,), name="agent-{}".format(k), daemon=True)
                   for k in range(graph.n)]
        for th in threads:
            th.start()
        for th in threads:
            th.join()
    primary = [e for e in errors if e is not None and not isinstance(e, comms.NetworkAborted)]
    if primary or any(errors):
        raise (primary or [e for e in errors if e is not None])[0]
    return algs
