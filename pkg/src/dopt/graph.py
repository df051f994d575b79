"""
Communication topology and consensus weights.

A :class:`Graph` stores directed edges ``(j, i)`` meaning that agent ``j``
sends to agent ``i`` (``j`` is an in-neighbor of ``i``). Self-loops are never
stored; self-influence lives in the diagonal of the weight matrix.
"""

from collections import deque
from pathlib import Path

import numpy as np

from .utils import splitmix64


class GraphError(ValueError):
    pass


class Graph:
    """Directed communication graph over agents ``0 .. n-1``."""

    def __init__(self, n, edges=()):
        if int(n) < 1:
            raise GraphError("a graph needs at least one agent, got n={}".format(n))
        self.n = int(n)
        seen = set()
        for e in edges:
            u, v = int(e[0]), int(e[1])
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise GraphError("edge ({}, {}) has an index outside [0, {})".format(u, v, self.n))
            if u == v:
                raise GraphError("self-loop on agent {} is not allowed".format(u))
            if (u, v) in seen:
                raise GraphError("duplicate edge ({}, {})".format(u, v))
            seen.add((u, v))
        self.edges = frozenset(seen)
        self._in = [[] for _ in range(self.n)]
        self._out = [[] for _ in range(self.n)]
        for u, v in sorted(self.edges):
            self._out[u].append(v)
            self._in[v].append(u)
        self._in = [tuple(sorted(x)) for x in self._in]
        self._out = [tuple(sorted(x)) for x in self._out]

    def in_neighbors(self, i):
        return self._in[i]

    def out_neighbors(self, i):
        return self._out[i]

    def edge_list(self):
        return sorted(self.edges)

    @property
    def undirected(self):
        return all((v, u) in self.edges for u, v in self.edges)

    def adjacency(self):
        """Matrix ``adj[i, j] = 1`` iff ``j`` is an in-neighbor of ``i``."""
        adj = np.zeros((self.n, self.n), dtype=int)
        for u, v in self.edges:
            adj[v, u] = 1
        return adj

    def __eq__(self, other):
        return isinstance(other, Graph) and self.n == other.n and self.edges == other.edges

    def __hash__(self):
        return hash((self.n, self.edges))

    def __repr__(self):
        return "Graph(n={}, edges={})".format(self.n, len(self.edges))


def from_edge_list(n, edges):
    return Graph(n, edges)


def ring(n, undirected=False):
    edges = {(i, (i + 1) % n) for i in range(n) if n > 1}
    if undirected:
        edges |= {(v, u) for u, v in edges}
    return Graph(n, edges)


def complete(n):
    return Graph(n, [(i, j) for i in range(n) for j in range(n) if i != j])


def example_six_agents():
    """Six-agent directed network where agent 1 hears from {2, 3} and talks to {3}.

    Only agent 1's neighborhood is pinned; the remaining edges are chosen so
    the graph is strongly connected.
    """
    edges = [(2, 1), (3, 1), (1, 3), (3, 0), (0, 2), (2, 4), (4, 5), (5, 3)]
    return Graph(6, edges)


def random_binomial(n, p, seed=0, undirected=True, max_tries=10000):
    """Erdos-Renyi graph, redrawn with fresh seeds until strongly connected.

    Parameters
    ----------
    n : int
        Number of agents.
    p : float
        Edge probability in ``(0, 1]``.
    seed : int
        Base seed; attempt ``k`` uses a seed derived from ``(seed, k)``.
    undirected : bool
        Draw each unordered pair once and add both directions.
    """
    if not 0 < p <= 1:
        if p == 0 and n == 1:
            return Graph(1)
        raise GraphError("edge probability must lie in (0, 1], got {}".format(p))
    for attempt in range(max_tries):
        rng = np.random.default_rng(splitmix64((int(seed) << 20) ^ attempt))
        edges = []
        if undirected:
            for i in range(n):
                for j in range(i + 1, n):
                    if rng.random() < p:
                        edges += [(i, j), (j, i)]
        else:
            for i in range(n):
                for j in range(n):
                    if i != j and rng.random() < p:
                        edges.append((i, j))
        g = Graph(n, edges)
        if is_strongly_connected(g):
            return g
    raise GraphError("no strongly connected graph after {} draws (n={}, p={})".format(max_tries, n, p))


def _reachable(adjacency_lists, start):
    seen = {start}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in adjacency_lists[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return seen


def is_strongly_connected(g):
    if g.n == 1:
        return True
    out = [g.out_neighbors(i) for i in range(g.n)]
    inn = [g.in_neighbors(i) for i in range(g.n)]
    return len(_reachable(out, 0)) == g.n and len(_reachable(inn, 0)) == g.n


def diameter(g):
    """Longest shortest directed path; ``inf`` when not strongly connected."""
    best = 0
    for s in range(g.n):
        dist = {s: 0}
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for v in g.out_neighbors(u):
                if v not in dist:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        if len(dist) < g.n:
            return float("inf")
        best = max(best, max(dist.values()))
    return best


def metropolis_weights(g):
    """Metropolis-Hastings weights ``a_ij = 1 / (1 + max(deg_i, deg_j))``."""
    if not g.undirected:
        raise GraphError("Metropolis weights need an undirected graph")
    deg = [len(g.in_neighbors(i)) for i in range(g.n)]
    A = np.zeros((g.n, g.n))
    for i in range(g.n):
        for j in g.in_neighbors(i):
            A[i, j] = 1.0 / (1 + max(deg[i], deg[j]))
        A[i, i] = 1.0 - sum(A[i, j] for j in g.in_neighbors(i))
    return A


def uniform_weights(g):
    """Row-stochastic weights ``1 / (|in_neighbors(i)| + 1)``."""
    A = np.zeros((g.n, g.n))
    for i in range(g.n):
        w = 1.0 / (len(g.in_neighbors(i)) + 1)
        A[i, i] = w
        for j in g.in_neighbors(i):
            A[i, j] = w
    return A


def weight_matrix(g):
    return metropolis_weights(g) if g.undirected else uniform_weights(g)


def read_edge_list(path, n=None):
    """Parse ``from to`` lines; ``#`` starts a comment."""
    edges = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GraphError("{}:{}: expected 'from to', got {!r}".format(path, lineno, line))
        edges.append((int(parts[0]), int(parts[1])))
    if n is None:
        n = 1 + max((max(e) for e in edges), default=0)
    return Graph(n, edges)


def write_edge_list(g, path):
    Path(path).write_text("".join("{} {}\n".format(u, v) for u, v in g.edge_list()))


def write_weights_csv(A, path):
    np.savetxt(path, A, delimiter=",", fmt="%.17g")
