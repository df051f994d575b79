"""Command-line entry point: ``dopt run`` and ``dopt report``.

Exit codes: 0 success, 1 configuration error, 2 runtime or algorithm
error, 3 timeout.
"""

import argparse
import dataclasses
import logging
import os
import subprocess
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import comms
from .agent import Agent
from .algorithms import ALGORITHMS, StepSize, read_history_csv, write_history_csv
from .experiments.drivers import COMPATIBLE, ExperimentError, check_compatible, instance_from_data, make_instance, score
from .experiments.instance import instance_hash, read_instance, write_instance
from .experiments.metrics import (
    GLOBAL,
    MetricsError,
    first_round,
    first_round_staying,
    read_metrics,
    write_metrics,
)
from .graph import GraphError, random_binomial, read_edge_list, weight_matrix, write_edge_list, write_weights_csv
from .runner import run_inprocess

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_TIMEOUT = 0, 1, 2, 3
SEED_ENV = "DOPT_SEED"

log = logging.getLogger("dopt")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    experiment: str = None
    algorithm: str = None
    n: int = 10
    iterations: int = 100
    step: str = None
    graph_p: float = 0.3
    graph_seed: int = None
    undirected: bool = None
    graph_file: str = None
    transport: str = "inproc"
    roster: str = None
    base_port: int = 47000
    agent_id: int = None
    seed: int = 0
    output: str = "dopt-out"
    horizon: int = 8
    C: float = 10.0
    instance: str = None
    timeout: float = comms.DEFAULT_TIMEOUT
    penalty: float = 1e3
    instance_sha256: str = None

    def resolved_undirected(self):
        if self.undirected is not None:
            return self.undirected
        return self.experiment != "svm"

    def resolved_graph_seed(self):
        return self.seed if self.graph_seed is None else self.graph_seed


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}
_TYPES = {"n": int, "iterations": int, "graph_seed": int, "base_port": int, "agent_id": int, "seed": int,
          "horizon": int, "graph_p": float, "C": float, "timeout": float, "penalty": float}


def _coerce(key, value):
    if value is None or value == "" or value == "None":
        return None
    if key == "undirected":
        if isinstance(value, bool):
            return value
        v = str(value).strip().lower()
        if v in ("true", "yes", "1"):
            return True
        if v in ("false", "no", "0"):
            return False
        raise ConfigError("undirected must be true or false, got {!r}".format(value))
    if key in _TYPES:
        try:
            return _TYPES[key](value)
        except ValueError:
            raise ConfigError("{} expects a number, got {!r}".format(key, value)) from None
    return str(value)


def read_config_file(path):
    """``key = value`` lines; ``#`` starts a comment; keys match the long flags."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("cannot read config file {}: {}".format(path, exc)) from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("{}:{}: expected 'key = value'".format(path, lineno))
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELDS:
            raise ConfigError("{}:{}: unknown key {!r}".format(path, lineno, key))
        out[key] = _coerce(key, value)
    return out


def write_config_file(cfg, path, extra=None):
    lines = []
    for name in _FIELDS:
        value = getattr(cfg, name)
        if value is not None:
            lines.append("{} = {}".format(name, str(value).lower() if isinstance(value, bool) else value))
    for k, v in (extra or {}).items():
        lines.append("{} = {}".format(k, v))
    Path(path).write_text("\n".join(lines) + "\n")


def build_config(ns, env=None):
    env = os.environ if env is None else env
    values = {}
    if getattr(ns, "config", None):
        values.update(read_config_file(ns.config))
    for name in _FIELDS:
        v = getattr(ns, name, None)
        if v is not None:
            values[name] = v
    if env.get(SEED_ENV):
        values["seed"] = _coerce("seed", env[SEED_ENV])
    cfg = RunConfig(**values)
    validate(cfg)
    return cfg


def validate(cfg):
    if cfg.experiment is None or cfg.algorithm is None:
        raise ConfigError("both --experiment and --algorithm are required")
    if cfg.experiment == "custom":
        if not cfg.instance:
            raise ConfigError("experiment 'custom' needs --instance FILE")
        try:
            kind, data = read_instance(cfg.instance)
        except (OSError, ValueError) as exc:
            raise ConfigError("cannot read instance {}: {}".format(cfg.instance, exc)) from None
        experiment, n = kind, len(data)
    else:
        experiment, n = cfg.experiment, cfg.n
    try:
        check_compatible(experiment, cfg.algorithm)
    except ExperimentError as exc:
        raise ConfigError(str(exc)) from None
    if n < 1 or cfg.iterations < 0:
        raise ConfigError("need n >= 1 and iterations >= 0")
    if cfg.step is not None:
        try:
            step = StepSize.parse(cfg.step)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if cfg.algorithm == "gradient_tracking" and step.rule != "constant":
            raise ConfigError("gradient_tracking needs a constant step, e.g. --step constant:0.001")
    if cfg.algorithm == "primal_decomposition" and not cfg.resolved_undirected() and not cfg.graph_file:
        raise ConfigError("primal_decomposition needs an undirected graph")
    if not 0 < cfg.graph_p <= 1:
        raise ConfigError("graph edge probability must lie in (0, 1]")
    if cfg.transport not in ("inproc", "tcp"):
        raise ConfigError("transport must be inproc or tcp")
    if cfg.agent_id is not None and not 0 <= cfg.agent_id < n:
        raise ConfigError("agent id {} outside [0, {})".format(cfg.agent_id, n))
    if cfg.agent_id is not None and cfg.transport != "tcp":
        raise ConfigError("--agent-id only applies to --transport tcp")


# -- run ---------------------------------------------------------------------

def load_instance(cfg):
    if cfg.instance:
        kind, data = read_instance(cfg.instance)
        if cfg.experiment not in ("custom", kind):
            raise ConfigError("instance file holds a {} instance, config says {}".format(kind, cfg.experiment))
        inst = instance_from_data(kind, data)
    else:
        inst = make_instance(cfg.experiment, cfg.n, cfg.seed, S=cfg.horizon, C=cfg.C)
    digest = instance_hash(inst.experiment, inst.data)
    if cfg.instance_sha256 and cfg.instance_sha256 != digest:
        raise ConfigError("instance hash mismatch: manifest says {}, regenerated {}".format(
            cfg.instance_sha256, digest))
    return inst, digest


def load_graph(cfg, n):
    if cfg.graph_file:
        g = read_edge_list(cfg.graph_file, n)
    else:
        g = random_binomial(n, cfg.graph_p, cfg.resolved_graph_seed(), undirected=cfg.resolved_undirected())
    if g.n != n:
        raise ConfigError("graph has {} agents, instance has {}".format(g.n, n))
    if cfg.algorithm == "primal_decomposition" and not g.undirected:
        raise ConfigError("primal_decomposition needs an undirected graph")
    return g


def _algorithm_kwargs(cfg):
    return {"penalty": cfg.penalty} if cfg.algorithm == "primal_decomposition" else {}


def _finish(cfg, inst, digest, histories, out):
    write_history_csv(out / "history.csv", histories)
    write_metrics(out / "metrics.csv", score(inst, histories))
    write_config_file(cfg, out / "manifest.txt", {"instance_sha256": digest})


def run_inproc(cfg):
    inst, digest = load_instance(cfg)
    g = load_graph(cfg, inst.n)
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    write_instance(out / "instance.bin", inst.experiment, inst.data)
    write_edge_list(g, out / "graph.txt")
    write_weights_csv(weight_matrix(g), out / "weights.csv")
    t0 = time.monotonic()
    algs = run_inprocess(g, inst.problems, cfg.algorithm, cfg.iterations, cfg.step, global_seed=cfg.seed,
                         timeout=cfg.timeout, **_algorithm_kwargs(cfg))
    log.info("%s on %d agents: %d rounds in %.1f s", cfg.algorithm, inst.n, cfg.iterations, time.monotonic() - t0)
    histories = {i: a.history for i, a in enumerate(algs)}
    _finish(cfg, inst, digest, histories, out)
    return EXIT_OK


def run_tcp_agent(cfg):
    """One agent of a TCP deployment; writes ``history_<id>.csv``."""
    inst, _ = load_instance(cfg)
    g = load_graph(cfg, inst.n)
    roster = comms.read_roster(cfg.roster) if cfg.roster else comms.make_roster(inst.n, base_port=cfg.base_port)
    if sorted(roster) != list(range(inst.n)):
        raise ConfigError("roster must list agents 0..{}".format(inst.n - 1))
    i = cfg.agent_id
    transport = comms.TcpTransport(i, roster, timeout=cfg.timeout)
    try:
        agent = Agent.from_graph(g, weight_matrix(g), i, local_data=inst.problems[i], transport=transport,
                                 global_seed=cfg.seed)
        alg = ALGORITHMS[cfg.algorithm](agent, stepsize=cfg.step, **_algorithm_kwargs(cfg))
        alg.run(iterations=cfg.iterations)
    finally:
        transport.close()
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    write_history_csv(out / "history_{}.csv".format(i), {i: alg.history})
    return EXIT_OK


def run_tcp_launcher(cfg):
    """Spawn one process per agent, wait, then merge their histories."""
    inst, digest = load_instance(cfg)
    g = load_graph(cfg, inst.n)
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    write_instance(out / "instance.bin", inst.experiment, inst.data)
    write_edge_list(g, out / "graph.txt")
    write_weights_csv(weight_matrix(g), out / "weights.csv")
    roster_path = Path(cfg.roster) if cfg.roster else out / "roster.txt"
    if not cfg.roster:
        comms.write_roster(comms.make_roster(inst.n, base_port=cfg.base_port), roster_path)
    child_cfg = dataclasses.replace(cfg, roster=str(roster_path), instance=str(out / "instance.bin"),
                                    experiment=inst.experiment, graph_file=str(out / "graph.txt"))
    launch = out / "launch.cfg"
    write_config_file(child_cfg, launch)
    env = dict(os.environ)
    env.pop(SEED_ENV, None)  # the launch file already carries the resolved seed
    src = str(Path(__file__).resolve().parent.parent)
    env["PYTHONPATH"] = src + os.pathsep + env.get("PYTHONPATH", "") if env.get("PYTHONPATH") else src
    procs = [subprocess.Popen([sys.executable, "-m", "dopt.cli", "run", "--config", str(launch),
                               "--agent-id", str(i)], env=env)
             for i in range(inst.n)]
    codes = [None] * inst.n
    failed = None
    while any(c is None for c in codes):
        for i, p in enumerate(procs):
            if codes[i] is None:
                codes[i] = p.poll()
                if codes[i] not in (None, 0) and failed is None:
                    failed = codes[i]
                    log.error("agent %d exited with code %d; stopping the others", i, codes[i])
                    for q in procs:
                        if q.poll() is None:
                            q.terminate()
        time.sleep(0.05)
    if failed is not None:
        return failed if failed in (EXIT_CONFIG, EXIT_RUNTIME, EXIT_TIMEOUT) else EXIT_RUNTIME
    histories = {}
    for i in range(inst.n):
        histories.update(read_history_csv(out / "history_{}.csv".format(i)))
    _finish(cfg, inst, digest, histories, out)
    return EXIT_OK


def cmd_run(cfg):
    if cfg.transport == "inproc":
        return run_inproc(cfg)
    if cfg.agent_id is not None:
        return run_tcp_agent(cfg)
    return run_tcp_launcher(cfg)


# -- report ------------------------------------------------------------------

THRESHOLDS = {
    "cost_error": [("<", 1e-2), ("<", 1e-4)],
    "max_solution_error": [("<", 1e-3)],
    "coupling": [("<=", 0.0), ("<=", 1e-3)],
    "max_phi": [("<=", 1e-9)],
    "max_cost_error": [("<=", 1e-8)],
    "agreement": [(">=", 1.0)],
}
_OPS = {"<": np.less, "<=": np.less_equal, ">=": np.greater_equal}


def report_lines(path):
    series = read_metrics(path)
    lines = []
    for name in sorted(series):
        if GLOBAL not in series[name]:
            continue
        values = series[name][GLOBAL]
        lines.append("{}: final (round {}) = {!r}".format(name, len(values) - 1, float(values[-1])))
        for op, thr in THRESHOLDS.get(name, []):
            pred = lambda v, op=op, thr=thr: _OPS[op](v, thr)  # noqa: E731
            first = first_round(values, pred)
            stay = first_round_staying(values, pred)
            lines.append("  first round with {} {} {:g}: {}; holds from round: {}".format(
                name, op, thr, "never" if first is None else first, "never" if stay is None else stay))
    return lines


def cmd_report(path):
    for line in report_lines(path):
        print(line)
    return EXIT_OK


# -- argument parsing --------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def make_parser():
    p = _Parser(prog="dopt", description="Distributed optimization over peer-to-peer agents.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment in-process or over TCP")
    r.add_argument("--config", help="key = value file; command-line flags take precedence")
    r.add_argument("--experiment", choices=sorted(COMPATIBLE) + ["custom"])
    r.add_argument("--algorithm", choices=sorted(ALGORITHMS))
    r.add_argument("--n", type=int, help="number of agents (default 10)")
    r.add_argument("--iterations", type=int, help="synchronous rounds (default 100)")
    r.add_argument("--step", help="constant:ALPHA or diminishing:P")
    r.add_argument("--graph-p", dest="graph_p", type=float, help="edge probability (default 0.3)")
    r.add_argument("--graph-seed", dest="graph_seed", type=int, help="graph seed (default: --seed)")
    r.add_argument("--graph-file", dest="graph_file", help="edge list instead of a random graph")
    g = r.add_mutually_exclusive_group()
    g.add_argument("--undirected", dest="undirected", action="store_const", const=True)
    g.add_argument("--directed", dest="undirected", action="store_const", const=False)
    r.add_argument("--transport", choices=["inproc", "tcp"])
    r.add_argument("--roster", help="TCP roster file: 'id host port' lines")
    r.add_argument("--base-port", dest="base_port", type=int, help="agent i listens on base_port + i")
    r.add_argument("--agent-id", dest="agent_id", type=int, help="run only this agent (TCP)")
    r.add_argument("--seed", type=int, help="global seed (env {} overrides)".format(SEED_ENV))
    r.add_argument("--output", help="output directory (default dopt-out)")
    r.add_argument("--horizon", type=int, help="microgrid horizon S (default 8)")
    r.add_argument("--C", dest="C", type=float, help="logistic regularization (default 10)")
    r.add_argument("--instance", help="instance file to load instead of generating one")
    r.add_argument("--timeout", type=float, help="exchange timeout in seconds (default 30)")
    r.add_argument("--penalty", type=float, help="primal decomposition slack penalty M (default 1e3)")

    rep = sub.add_parser("report", help="summarize a metrics CSV")
    rep.add_argument("metrics")
    return p


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        ns = make_parser().parse_args(argv)
        if ns.verbose:
            log.setLevel(logging.DEBUG)
        if ns.command == "report":
            try:
                return cmd_report(ns.metrics)
            except (OSError, MetricsError) as exc:
                log.error("%s", exc)
                return EXIT_CONFIG
        cfg = build_config(ns)
        return cmd_run(cfg)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except (TimeoutError, comms.ExchangeTimeout) as exc:
        log.error("timeout: %s", exc)
        return EXIT_TIMEOUT
    except (GraphError, ExperimentError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - mapped to the runtime exit code
        log.error("run failed: %s: %s", type(exc).__name__, exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
