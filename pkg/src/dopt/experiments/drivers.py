"""Set up, run and score the three experiments."""

from dataclasses import dataclass

from .. import graph as graphs
from ..algorithms import ALGORITHMS
from .data import gen_classification, gen_microgrid, gen_svm, logistic_problems, microgrid_problems, svm_problems
from .metrics import coupled_metrics, cost_coupled_metrics, svm_metrics
from .oracle import centralized_oracle

COMPATIBLE = {
    "logistic": ("gradient_tracking", "subgradient"),
    "svm": ("constraints_consensus",),
    "microgrid": ("dual_subgradient", "primal_decomposition"),
}
SETUPS = {"logistic": "cost_coupled", "svm": "common_cost", "microgrid": "constraint_coupled"}


class ExperimentError(ValueError):
    pass


class OracleError(RuntimeError):
    """The centralized reference solve did not reach optimality."""


@dataclass
class Instance:
    experiment: str
    data: list
    problems: list

    @property
    def n(self):
        return len(self.data)


def check_compatible(experiment, algorithm):
    if algorithm not in ALGORITHMS:
        raise ExperimentError("unknown algorithm {!r}; choose from {}".format(algorithm, ", ".join(sorted(ALGORITHMS))))
    if experiment not in COMPATIBLE:
        raise ExperimentError("unknown experiment {!r}".format(experiment))
    if algorithm not in COMPATIBLE[experiment]:
        raise ExperimentError("{} is a {} experiment; {} expects {} data (use one of: {})".format(
            experiment, SETUPS[experiment], algorithm, ALGORITHMS[algorithm].setup,
            ", ".join(COMPATIBLE[experiment])))


def problems_for(experiment, data):
    if experiment == "logistic":
        return logistic_problems(data)
    if experiment == "svm":
        return svm_problems(data)
    if experiment == "microgrid":
        return microgrid_problems(data)
    raise ExperimentError("unknown experiment {!r}".format(experiment))


def make_instance(experiment, n, seed=0, S=8, C=10.0):
    if experiment == "logistic":
        data = gen_classification(n, seed, C=C)
    elif experiment == "svm":
        data = gen_svm(n, seed)
    elif experiment == "microgrid":
        data = gen_microgrid(n, S, seed)
    else:
        raise ExperimentError("unknown experiment {!r}".format(experiment))
    return Instance(experiment, data, problems_for(experiment, data))


def instance_from_data(experiment, data):
    return Instance(experiment, data, problems_for(experiment, data))


def make_graph(n, p=0.3, seed=0, undirected=True):
    return graphs.random_binomial(n, p, seed, undirected=undirected)


def score(instance, histories, oracle=None):
    """Metric rows ``(round, agent, metric, value)`` for a finished run."""
    oracle = oracle or centralized_oracle(instance.problems)
    if oracle.status != "optimal":
        raise OracleError("centralized oracle ended with status {}".format(oracle.status))
    if instance.experiment == "logistic":
        return cost_coupled_metrics(instance.problems, histories, oracle)
    if instance.experiment == "svm":
        return svm_metrics(instance.data, histories, oracle)
    return coupled_metrics(instance.problems, histories, oracle)
