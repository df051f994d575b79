"""Metric series from per-agent histories, and the ``round,agent,metric,value`` CSV."""

import csv

import numpy as np

from .data import pool, svm_violation

HEADER = ["round", "agent", "metric", "value"]
GLOBAL = "all"


class MetricsError(ValueError):
    pass


def _rounds(histories):
    lengths = {len(h) for h in histories.values()}
    if len(lengths) != 1:
        raise MetricsError("agents logged different numbers of rounds: {}".format(sorted(lengths)))
    return lengths.pop()


def cost_coupled_metrics(problems, histories, oracle):
    """``cost_error = |sum_i f_i(xbar) - f*| / |f*|`` and ``max_solution_error``."""
    ids = sorted(histories)
    rows = []
    x_star = np.asarray(oracle.x)
    for t in range(_rounds(histories)):
        xs = [histories[i][t]["x"] for i in ids]
        xbar = np.mean(xs, axis=0)
        cost = sum(problems[i].objective.eval(xbar) for i in ids)
        errs = [float(np.linalg.norm(x - x_star)) for x in xs]
        for i, e in zip(ids, errs):
            rows.append((t, i, "local_cost", histories[i][t]["local_cost"]))
            rows.append((t, i, "solution_error", e))
        rows.append((t, GLOBAL, "cost_error", abs(cost - oracle.value) / abs(oracle.value)))
        rows.append((t, GLOBAL, "max_solution_error", max(errs)))
    return rows


def svm_metrics(data, histories, oracle):
    """Per agent ``phi`` and cost error; globally the worst of both and basis agreement."""
    ids = sorted(histories)
    P, L = pool(data)
    rows = []
    for t in range(_rounds(histories)):
        phis, errs, hashes = [], [], set()
        for i in ids:
            h = histories[i][t]
            x = h["x"]
            phi = svm_violation(P, L, x[:-1], x[-1])
            err = abs(h["local_cost"] - oracle.value)
            phis.append(phi)
            errs.append(err)
            hashes.add(float(h["aux"]["basis_hash"][0]))
            rows.append((t, i, "phi", phi))
            rows.append((t, i, "local_cost", h["local_cost"]))
            rows.append((t, i, "cost_error", err))
        rows.append((t, GLOBAL, "max_phi", max(phis)))
        rows.append((t, GLOBAL, "max_cost_error", max(errs)))
        rows.append((t, GLOBAL, "agreement", 1.0 if len(hashes) == 1 else 0.0))
    return rows


def coupled_metrics(problems, histories, oracle):
    """Cost error of ``sum_i f_i(x_i)``, coupling value ``max_k sum_i g_i(x_i)_k``.

    Allocation drift ``max_k |sum_i y_i^t - sum_i y_i^0|`` is added when the
    histories carry allocations.
    """
    ids = sorted(histories)
    rows = []
    has_y = all("y" in histories[i][0]["aux"] for i in ids)
    y0 = sum(histories[i][0]["aux"]["y"] for i in ids) if has_y else None
    for t in range(_rounds(histories)):
        cost = 0.0
        g = 0.0
        for i in ids:
            h = histories[i][t]
            cost += problems[i].objective.eval(h["x"])
            g = g + problems[i].coupling.eval(h["x"])
            rows.append((t, i, "local_cost", h["local_cost"]))
        rows.append((t, GLOBAL, "cost_error", abs(cost - oracle.value) / abs(oracle.value)))
        rows.append((t, GLOBAL, "coupling", float(np.max(g))))
        if has_y:
            y = sum(histories[i][t]["aux"]["y"] for i in ids)
            rows.append((t, GLOBAL, "allocation_drift", float(np.max(np.abs(y - y0)))))
    return rows


def write_metrics(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HEADER)
        for t, agent, name, value in rows:
            w.writerow([t, agent, name, repr(float(value))])


def read_metrics(path):
    """Returns ``{metric: {agent: np.ndarray indexed by round}}``; agent ``"all"`` for global rows."""
    series = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise MetricsError("{}:1: empty metrics file".format(path))
        if header != HEADER:
            raise MetricsError("{}:1: expected header {}, got {}".format(path, ",".join(HEADER), ",".join(header)))
        raw = {}
        for lineno, row in enumerate(reader, 2):
            if len(row) != 4:
                raise MetricsError("{}:{}: expected 4 fields, got {}".format(path, lineno, len(row)))
            try:
                t, value = int(row[0]), float(row[3])
            except ValueError:
                raise MetricsError("{}:{}: malformed number in {!r}".format(path, lineno, row)) from None
            agent = row[1] if row[1] == GLOBAL else int(row[1])
            raw.setdefault(row[2], {}).setdefault(agent, []).append((t, value))
    if not raw:
        raise MetricsError("{}:2: no metric rows".format(path))
    for name, per_agent in raw.items():
        series[name] = {a: np.array([v for _, v in sorted(pts)]) for a, pts in per_agent.items()}
    return series


def first_round(values, predicate):
    """First index where ``predicate`` holds, or ``None``."""
    hits = np.flatnonzero(predicate(np.asarray(values)))
    return int(hits[0]) if hits.size else None


def first_round_staying(values, predicate):
    """First index from which ``predicate`` holds through the end, or ``None``."""
    ok = predicate(np.asarray(values))
    if not ok.size or not ok[-1]:
        return None
    bad = np.flatnonzero(~ok)
    return int(bad[-1] + 1) if bad.size else 0
