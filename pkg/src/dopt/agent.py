import numpy as np

from . import comms
from .problem import CommonCostLocal, ConstraintCoupledLocal, CostCoupledLocal, Problem
from .utils import agent_rng

WEIGHT_TOL = 1e-12


class AgentError(ValueError):
    pass


class Agent:
    """Execution context of one agent: identity, neighbors, weights, data, transport.

    Parameters
    ----------
    id : int
    in_neighbors, out_neighbors : iterable of int
    weights : dict, optional
        ``{j: a_ij}`` over ``{id} U in_neighbors``; must sum to one.
        Defaults to uniform weights ``1 / (|in_neighbors| + 1)``.
    local_data : CostCoupledLocal | CommonCostLocal | ConstraintCoupledLocal | Problem, optional
    transport : comms.Transport, optional
    global_seed : int
        Together with ``id``, seeds the agent's private random stream.
    """

    def __init__(self, id, in_neighbors, out_neighbors, weights=None, local_data=None, transport=None,
                 global_seed=0):
        self.id = int(id)
        self.in_neighbors = tuple(sorted(int(j) for j in in_neighbors))
        self.out_neighbors = tuple(sorted(int(j) for j in out_neighbors))
        if self.id in self.in_neighbors or self.id in self.out_neighbors:
            raise AgentError("agent {} lists itself as a neighbor".format(self.id))
        if weights is None:
            w = 1.0 / (len(self.in_neighbors) + 1)
            weights = {j: w for j in (self.id,) + self.in_neighbors}
        self.in_weights = self._check_weights(weights)
        self.transport = transport
        self.global_seed = int(global_seed)
        self.rng = agent_rng(self.global_seed, self.id)
        self.dim = None
        self.local_data = None
        self._round = 0
        self._barrier_round = 0
        if local_data is not None:
            self.set_problem(local_data)

    def _check_weights(self, weights):
        weights = {int(j): float(w) for j, w in dict(weights).items()}
        expected = {self.id, *self.in_neighbors}
        if set(weights) != expected:
            raise AgentError("agent {}: weight keys {} do not match self + in-neighbors {}".format(
                self.id, sorted(weights), sorted(expected)))
        if any(w < 0 for w in weights.values()):
            raise AgentError("agent {}: negative consensus weight".format(self.id))
        total = sum(weights[j] for j in sorted(weights))
        if abs(total - 1.0) > WEIGHT_TOL:
            raise AgentError("agent {}: weights sum to {!r}, not 1".format(self.id, total))
        return weights

    @classmethod
    def from_graph(cls, graph, weight_matrix, agent_id, **kwargs):
        row = weight_matrix[agent_id]
        ins = graph.in_neighbors(agent_id)
        weights = {j: float(row[j]) for j in (agent_id,) + tuple(ins)}
        return cls(agent_id, ins, graph.out_neighbors(agent_id), weights=weights, **kwargs)

    def set_problem(self, local_data, dim=None):
        """Attach the agent's share of the global problem.

        A bare :class:`Problem` is read as cost-coupled data.
        """
        if isinstance(local_data, Problem):
            local_data = CostCoupledLocal(local_data.objective, local_data.constraints)
        if not isinstance(local_data, (CostCoupledLocal, CommonCostLocal, ConstraintCoupledLocal)):
            raise AgentError("unsupported local data {!r}".format(type(local_data).__name__))
        expected = dim if dim is not None else self.dim
        if expected is not None and local_data.dim != expected:
            raise AgentError("agent {}: local data has dimension {}, expected {}".format(
                self.id, local_data.dim, expected))
        self.local_data = local_data
        self.dim = local_data.dim
        return self

    @property
    def problem(self):
        return self.local_data

    def _need_transport(self):
        if self.transport is None:
            if not self.in_neighbors and not self.out_neighbors:
                return None
            raise AgentError("agent {} has no transport".format(self.id))
        return self.transport

    def neighbors_exchange(self, payload):
        """Send ``payload`` to all out-neighbors, return ``{j: payload_j}`` from in-neighbors."""
        single = not isinstance(payload, (list, tuple))
        t = self._need_transport()
        rnd = self._round
        self._round += 1
        if t is None:
            return {}
        got = comms.neighbors_exchange(t, payload, self.in_neighbors, self.out_neighbors, rnd)
        return {j: v[0] for j, v in got.items()} if single else got

    def neighbors_exchange_keyed(self, payloads):
        """Distinct payload per out-neighbor: ``payloads = {j: tensor(s)}``."""
        first = next(iter(payloads.values()), None)
        single = first is not None and not isinstance(first, (list, tuple))
        if set(payloads) != set(self.out_neighbors):
            raise ValueError("agent {}: keyed payloads for {} but out-neighbors are {}".format(
                self.id, sorted(payloads), list(self.out_neighbors)))
        t = self._need_transport()
        rnd = self._round
        self._round += 1
        if t is None:
            return {}
        got = comms.neighbors_exchange_keyed(t, payloads, self.in_neighbors, self.out_neighbors, rnd)
        return {j: v[0] for j, v in got.items()} if single else got

    def barrier(self):
        t = self.transport
        rnd = self._barrier_round
        self._barrier_round += 1
        if t is not None and t.n_agents > 1:
            t.barrier(rnd)

    def mix(self, own, received):
        """``a_ii * own + sum_j a_ij * received[j]`` summed in ascending ``j``."""
        acc = self.in_weights[self.id] * np.asarray(own, dtype=float)
        for j in self.in_neighbors:
            acc = acc + self.in_weights[j] * received[j]
        return acc

    def __repr__(self):
        return "Agent(id={}, in={}, out={})".format(self.id, list(self.in_neighbors), list(self.out_neighbors))
