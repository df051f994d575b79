import csv
import re
from dataclasses import dataclass

import numpy as np


class AlgorithmError(RuntimeError):
    pass


@dataclass(frozen=True)
class StepSize:
    """``constant``: alpha^t = value; ``diminishing``: alpha^t = (1/t)^value, t >= 1."""

    rule: str = "constant"
    value: float = 0.001

    def __post_init__(self):
        if self.rule not in ("constant", "diminishing"):
            raise ValueError("unknown step rule {!r}".format(self.rule))
        if self.rule == "constant" and not self.value > 0:
            raise ValueError("constant step must be positive")
        if self.rule == "diminishing" and not 0.5 < self.value <= 1:
            raise ValueError("diminishing exponent must lie in (0.5, 1], got {}".format(self.value))

    def __call__(self, t):
        if self.rule == "constant":
            return self.value
        if t < 1:
            raise ValueError("diminishing steps are indexed from t = 1")
        return (1.0 / t) ** self.value

    @classmethod
    def parse(cls, text):
        """``constant:0.001`` or ``diminishing:0.6``."""
        if isinstance(text, StepSize):
            return text
        rule, sep, value = str(text).partition(":")
        if not sep:
            raise ValueError("step spec must look like 'constant:0.001' or 'diminishing:0.6', got {!r}".format(text))
        return cls(rule.strip(), float(value))

    def __str__(self):
        return "{}:{!r}".format(self.rule, self.value)


class Algorithm:
    """Per-agent synchronous state machine: ``initialize -> iterate(t) ... -> result``.

    Subclasses implement ``_init_state`` and ``iterate``; both append to
    ``history`` through :meth:`_record`.
    """

    name = None
    setup = None

    def __init__(self, agent, initial_condition=None, stepsize=None, enable_log=True):
        if agent.local_data is None:
            raise AlgorithmError("agent {} has no local problem".format(agent.id))
        if self.setup is not None and agent.local_data.setup != self.setup:
            raise AlgorithmError("{} needs {} data, agent {} holds {}".format(
                self.name, self.setup, agent.id, agent.local_data.setup))
        self.agent = agent
        self.stepsize = StepSize.parse(stepsize) if stepsize is not None else self.default_step()
        self.initial_condition = initial_condition
        self.enable_log = enable_log
        self.history = []
        self.round = 0
        self._initialized = False

    def default_step(self):
        return StepSize("diminishing", 0.6)

    def initialize(self):
        if not self._initialized:
            self._init_state()
            self._initialized = True
            self._record()

    def _init_state(self):
        raise NotImplementedError

    def iterate(self, t):
        raise NotImplementedError

    def local_cost(self):
        return float(self.agent.local_data.objective.eval(self.x))

    def auxiliary(self):
        """Named auxiliary vectors to log alongside the iterate."""
        return {}

    def _record(self):
        if not self.enable_log:
            self.history[:] = self.history[:1]
        self.history.append({
            "round": self.round,
            "x": np.array(self.x, dtype=float).copy(),
            "aux": {k: np.atleast_1d(np.array(v, dtype=float)).copy() for k, v in self.auxiliary().items()},
            "local_cost": self.local_cost(),
        })

    def run(self, iterations=100, stepsize=None, barrier_every_round=False):
        """Run ``iterations`` synchronous rounds; returns the history list.

        The history holds the initial state plus one record per round.
        """
        if stepsize is not None:
            self.stepsize = StepSize.parse(stepsize)
        self.agent.barrier()
        self.initialize()
        for _ in range(int(iterations)):
            self.round += 1
            self.iterate(self.round)
            self._record()
            if barrier_every_round:
                self.agent.barrier()
        self.agent.barrier()
        return self.history

    def get_result(self):
        return np.array(self.x, dtype=float).copy()

    def sequence(self):
        """Iterates as an array of shape ``(rounds + 1, dim)``."""
        return np.vstack([h["x"] for h in self.history])


def history_rows(agent_id, history):
    """Flatten a history into CSV rows (header first)."""
    if not history:
        return []
    first = history[0]
    d = first["x"].shape[0]
    aux_cols = []
    for name, v in first["aux"].items():
        aux_cols += ["{}_{}".format(name, k) for k in range(v.shape[0])]
    header = ["round", "agent_id", "local_cost"] + ["x_{}".format(k) for k in range(d)] + aux_cols
    rows = [header]
    for h in history:
        aux = [repr(float(a)) for v in h["aux"].values() for a in v]
        rows.append([str(h["round"]), str(agent_id), repr(float(h["local_cost"]))]
                    + [repr(float(a)) for a in h["x"]] + aux)
    return rows


def write_history_csv(path, histories):
    """``histories``: ``{agent_id: history}``; rows are written agent by agent."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        header_written = False
        for agent_id in sorted(histories):
            rows = history_rows(agent_id, histories[agent_id])
            if not rows:
                continue
            if not header_written:
                w.writerow(rows[0])
                header_written = True
            w.writerows(rows[1:])


def read_history_csv(path):
    """Inverse of :func:`write_history_csv` (auxiliary columns regrouped by prefix)."""
    histories = {}
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        xcols = [k for k, h in enumerate(header) if re.fullmatch(r"x_\d+", h)]
        aux = {}
        for k, h in enumerate(header[3:], 3):
            if k not in xcols:
                aux.setdefault(h.rsplit("_", 1)[0], []).append(k)
        for row in r:
            agent_id = int(row[1])
            histories.setdefault(agent_id, []).append({
                "round": int(row[0]),
                "x": np.array([float(row[k]) for k in xcols]),
                "aux": {name: np.array([float(row[k]) for k in cols]) for name, cols in aux.items()},
                "local_cost": float(row[2]),
            })
    return histories
