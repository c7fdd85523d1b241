"""Weighted undirected graphs with a source vertex and a sink set.

Edges are stored once in canonical order ``(u, v, w)`` with ``u < v``.  The
arc list materializes both orientations: edge ``k`` owns arcs ``2k = (u, v)``
and ``2k + 1 = (v, u)``, so the arc-swap permutation is ``k ^ 1``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


class GraphValidationError(ValueError):
    pass


def _canonical_edges(edges):
    out = []
    seen = {}
    for u, v, w in edges:
        u, v, w = int(u), int(v), float(w)
        if u == v:
            raise GraphValidationError(f"self-loop at vertex {u}")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise GraphValidationError(f"duplicate edge {key[0]}-{key[1]}")
        if not np.isfinite(w) or w <= 0:
            raise GraphValidationError(f"nonpositive weight {w} on edge {key[0]}-{key[1]}")
        seen[key] = w
    for key in sorted(seen):
        out.append((key[0], key[1], seen[key]))
    return tuple(out)


@dataclass(frozen=True, eq=False)
class Graph:
    """Graph ``G = (V, E, w)`` with source ``s`` and sink set ``M``.

    Construct through :func:`make_graph` or :func:`load_graph`, which validate.
    """

    n: int
    edges: tuple
    source: int
    sinks: tuple

    # -- arc structure -------------------------------------------------
    @cached_property
    def arc_tail(self) -> np.ndarray:
        e = np.asarray([(u, v) for u, v, _ in self.edges], dtype=np.int64).reshape(-1, 2)
        return np.column_stack([e[:, 0], e[:, 1]]).ravel()

    @cached_property
    def arc_head(self) -> np.ndarray:
        e = np.asarray([(u, v) for u, v, _ in self.edges], dtype=np.int64).reshape(-1, 2)
        return np.column_stack([e[:, 1], e[:, 0]]).ravel()

    @cached_property
    def arc_weight(self) -> np.ndarray:
        w = np.asarray([w for _, _, w in self.edges], dtype=float)
        return np.repeat(w, 2)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_arcs(self) -> int:
        return 2 * len(self.edges)

    @cached_property
    def swap(self) -> np.ndarray:
        """Index permutation pairing arc (x, y) with (y, x)."""
        return np.arange(self.n_arcs) ^ 1

    @cached_property
    def arc_index(self) -> dict:
        return {(int(x), int(y)): k for k, (x, y) in enumerate(zip(self.arc_tail, self.arc_head))}

    # -- weights and degrees -------------------------------------------
    @cached_property
    def weights(self) -> np.ndarray:
        """Dense symmetric weight table, zero meaning no edge."""
        A = np.zeros((self.n, self.n))
        A[self.arc_tail, self.arc_head] = self.arc_weight
        return A

    @cached_property
    def degrees(self) -> np.ndarray:
        d = np.zeros(self.n)
        np.add.at(d, self.arc_tail, self.arc_weight)
        return d

    @property
    def total_weight(self) -> float:
        return float(self.degrees.sum())

    @cached_property
    def sink_mask(self) -> np.ndarray:
        m = np.zeros(self.n, dtype=bool)
        m[list(self.sinks)] = True
        return m

    @cached_property
    def transient(self) -> np.ndarray:
        """Vertices outside the sink, in increasing order."""
        return np.flatnonzero(~self.sink_mask)

    @cached_property
    def transition(self) -> np.ndarray:
        """Random-walk transition matrix ``P[x, y] = w_xy / d_x``."""
        return self.weights / self.degrees[:, None]

    def is_regular(self, tol=1e-12) -> bool:
        d = self.degrees
        return bool(np.all(np.abs(d - d[0]) <= tol * max(1.0, d[0])))

    def neighbors(self, x):
        return self.arc_head[self.arc_tail == x]

    def with_source(self, s: int) -> "Graph":
        """Same graph and sink with a different source."""
        if s == self.source:
            return self
        return make_graph(self.n, self.edges, s, self.sinks)

    # -- serialization -------------------------------------------------
    def to_text(self) -> str:
        head = f"{self.n} {self.source} " + " ".join(str(m) for m in self.sinks)
        lines = [head.rstrip()]
        lines += [f"{u} {v} {w!r}" for u, v, w in self.edges]
        return "\n".join(lines) + "\n"

    def __repr__(self):
        return (f"Graph(n={self.n}, |E|={self.n_edges}, s={self.source}, "
                f"M={list(self.sinks)})")


def _check_reaches_sink(n, edges, sinks):
    # every vertex must be connected to some sink
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for u, v, _ in edges:
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
    good = {find(m) for m in sinks}
    stranded = sorted(x for x in range(n) if find(x) not in good)
    if stranded:
        raise GraphValidationError(
            f"vertices {stranded} have no path to the sink set {list(sinks)}")


def make_graph(n, edges, source, sinks) -> Graph:
    """Validate and build a :class:`Graph`."""
    n = int(n)
    if n < 2:
        raise GraphValidationError("need at least two vertices")
    sinks = tuple(sorted({int(m) for m in sinks}))
    source = int(source)
    if not sinks:
        raise GraphValidationError("sink set is empty")
    for x in (source, *sinks):
        if not 0 <= x < n:
            raise GraphValidationError(f"vertex index {x} out of range for n={n}")
    if source in sinks:
        raise GraphValidationError(f"source {source} lies in the sink set")
    edges = _canonical_edges(edges)
    for u, v, _ in edges:
        if u < 0 or v >= n:
            raise GraphValidationError(f"edge {u}-{v} has vertex index out of range for n={n}")
    _check_reaches_sink(n, edges, sinks)
    g = Graph(n, edges, source, sinks)
    isolated = np.flatnonzero(g.degrees == 0)
    if isolated.size:
        raise GraphValidationError(f"isolated vertices {isolated.tolist()}")
    return g


def load_graph(text: str) -> Graph:
    """Parse the edge-list format: header ``n s m1 m2 ...`` then ``u v w`` lines.

    Blank lines and ``#`` comments are ignored.
    """
    rows = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            rows.append(line.split())
    if not rows:
        raise GraphValidationError("empty graph document")
    head = " ".join(rows[0]).replace(",", " ").split()
    if len(head) < 3:
        raise GraphValidationError("header must be 'n s m1 [m2 ...]'")
    try:
        n, s = int(head[0]), int(head[1])
        sinks = [int(t) for t in head[2:]]
        edges = []
        for r in rows[1:]:
            if len(r) != 3:
                raise GraphValidationError(f"edge line must be 'u v w', got {' '.join(r)!r}")
            edges.append((int(r[0]), int(r[1]), float(r[2])))
    except ValueError as exc:
        if isinstance(exc, GraphValidationError):
            raise
        raise GraphValidationError(f"malformed number: {exc}") from None
    return make_graph(n, edges, s, sinks)


def read_graph(path) -> Graph:
    with open(path) as fh:
        return load_graph(fh.read())


# ---------------------------------------------------------------------------
# source stub


@dataclass(frozen=True, eq=False)
class ModifiedGraph:
    """``G`` with a new source ``sigma = n`` attached to ``s`` by weight ``eta * d_s``."""

    graph: Graph
    base: Graph
    eta: float
    arc_map: np.ndarray  # arc index of G -> arc index of the modified graph

    @property
    def sigma(self) -> int:
        return self.base.n

    @property
    def stub_arcs(self):
        g = self.graph
        return g.arc_index[(self.sigma, self.base.source)], g.arc_index[(self.base.source, self.sigma)]


def attach_source_stub(G: Graph, eta: float) -> ModifiedGraph:
    if not eta >= 1:
        raise GraphValidationError(f"stub parameter eta={eta} must be >= 1")
    s = G.source
    w_stub = float(eta) * G.degrees[s]
    H = make_graph(G.n + 1, list(G.edges) + [(s, G.n, w_stub)], G.n, G.sinks)
    amap = np.array([H.arc_index[(int(x), int(y))] for x, y in zip(G.arc_tail, G.arc_head)])
    return ModifiedGraph(H, G, float(eta), amap)


def detach_source_stub(Gh: ModifiedGraph) -> Graph:
    """Delete ``sigma`` and recover the original graph."""
    sig = Gh.sigma
    edges = [(u, v, w) for u, v, w in Gh.graph.edges if sig not in (u, v)]
    return make_graph(Gh.base.n, edges, Gh.base.source, Gh.graph.sinks)


# ---------------------------------------------------------------------------
# generators


def random_regular_graph(n, d, m, seed, max_attempts=2000) -> Graph:
    """Connected ``d``-regular unit-weight graph from the pairing model.

    Pairings with loops or repeated edges, and disconnected outcomes, are
    rejected and redrawn.  The sink is ``m`` uniform vertices and the source
    is uniform outside it.
    """
    n, d, m = int(n), int(d), int(m)
    if (n * d) % 2 or d < 1 or d >= n:
        raise GraphValidationError(f"no {d}-regular graph on {n} vertices")
    if not 1 <= m < n:
        raise GraphValidationError(f"sink size m={m} must satisfy 1 <= m < n")
    rng = np.random.default_rng(seed)
    points = np.repeat(np.arange(n), d)
    for attempt in range(1, max_attempts + 1):
        pairs = rng.permutation(points).reshape(-1, 2)
        if np.any(pairs[:, 0] == pairs[:, 1]):
            continue
        key = np.sort(pairs, axis=1)
        if len(np.unique(key[:, 0] * n + key[:, 1])) != len(key):
            continue
        if not _connected(n, key):
            continue
        sinks = rng.choice(n, size=m, replace=False)
        rest = np.setdiff1d(np.arange(n), sinks)
        s = int(rng.choice(rest))
        return make_graph(n, [(u, v, 1.0) for u, v in key], s, sinks.tolist())
    raise GraphValidationError(
        f"pairing model failed to give a simple connected graph after {max_attempts} attempts")


def _connected(n, pairs):
    adj = [[] for _ in range(n)]
    for u, v in pairs:
        adj[u].append(v)
        adj[v].append(u)
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        x = stack.pop()
        for y in adj[x]:
            if not seen[y]:
                seen[y] = True
                stack.append(y)
    return bool(seen.all())


def random_weighted_graph(n, seed, extra=1.0, n_sinks=None, wmin=0.2, wmax=2.0) -> Graph:
    """Random connected weighted graph for property tests.

    A random spanning tree plus about ``extra * n`` additional edges, uniform
    weights in ``[wmin, wmax]``, a random sink of size ``n_sinks`` (default
    1 to n/4) and a random source.
    """
    rng = np.random.default_rng(seed)
    n = int(n)
    order = rng.permutation(n)
    edges = {}
    for i in range(1, n):
        u, v = order[i], order[rng.integers(i)]
        edges[(min(u, v), max(u, v))] = None
    for _ in range(int(extra * n)):
        u, v = rng.integers(n, size=2)
        if u != v:
            edges[(min(u, v), max(u, v))] = None
    if n_sinks is None:
        n_sinks = int(rng.integers(1, max(2, n // 4 + 1)))
    n_sinks = min(max(1, n_sinks), n - 1)
    sinks = rng.choice(n, size=n_sinks, replace=False)
    rest = np.setdiff1d(np.arange(n), sinks)
    s = int(rng.choice(rest))
    ws = rng.uniform(wmin, wmax, size=len(edges))
    return make_graph(n, [(u, v, w) for (u, v), w in zip(edges, ws)], s, sinks.tolist())


def path_graph(n, s=0, sinks=None, weight=1.0) -> Graph:
    """Path ``0 - 1 - ... - n-1``; by default the sink is the far end."""
    if sinks is None:
        sinks = [n - 1]
    return make_graph(n, [(i, i + 1, weight) for i in range(n - 1)], s, sinks)


def cycle_graph(n, s=0, sinks=(1,), weight=1.0) -> Graph:
    return make_graph(n, [(i, (i + 1) % n, weight) for i in range(n)], s, sinks)
