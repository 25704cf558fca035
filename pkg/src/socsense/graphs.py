"""Graphs with colored/labelled nodes, random generators and node samplers.

Edges of directed graphs read "u follows v": ``followers(v)`` is the
in-degree of ``v`` and ``followees(u)`` the out-degree of ``u``.  Undirected
graphs keep one symmetric adjacency.

The three samplers of the friendship paradox are

* ``X``: a uniform node,
* ``Y``: a uniform endpoint of a uniform edge (degree-biased),
* ``Z``: a uniform neighbor of a uniform node.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, TextIO

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from .errors import Disconnected, NoEdges
from .probability import as_stochastic

COLORS = ("red", "blue")
FRIEND_RESAMPLE_CAP = 10_000


class Graph:
    """Mutable simple graph with per-node ``color`` and ``label`` attributes.

    Node ids are nonnegative integers.  The node list supports O(1) uniform
    sampling and O(1) removal (swap with the last entry).
    """

    def __init__(self, directed: bool = False):
        self.directed = directed
        self.nodes: list[int] = []
        self._pos: dict[int, int] = {}
        self.succ: dict[int, set[int]] = {}
        self.pred: dict[int, set[int]] = self.succ if not directed else {}
        self.color: dict[int, str | None] = {}
        self.label: dict[int, int | None] = {}
        self._next = 0
        self._m = 0

    # -- construction ------------------------------------------------------

    def add_node(self, node: int | None = None, color: str | None = None, label: int | None = None) -> int:
        if node is None:
            node = self._next
        if node in self._pos:
            raise ValueError(f"node {node} already present")
        self._next = max(self._next, node + 1)
        self._pos[node] = len(self.nodes)
        self.nodes.append(node)
        self.succ[node] = set()
        if self.directed:
            self.pred[node] = set()
        self.color[node] = color
        self.label[node] = label
        return node

    def add_edge(self, u: int, v: int) -> bool:
        """Add ``u -> v`` (or ``u - v``); self-loops and duplicates are ignored."""
        if u == v or v in self.succ[u]:
            return False
        self.succ[u].add(v)
        if self.directed:
            self.pred[v].add(u)
        else:
            self.succ[v].add(u)
        self._m += 1
        return True

    def remove_node(self, u: int) -> None:
        for v in self.succ[u]:
            (self.pred if self.directed else self.succ)[v].discard(u)
        if self.directed:
            for v in self.pred[u]:
                self.succ[v].discard(u)
            self._m -= len(self.succ[u]) + len(self.pred[u])
            del self.pred[u]
        else:
            self._m -= len(self.succ[u])
        del self.succ[u]
        i = self._pos.pop(u)
        last = self.nodes.pop()
        if last != u:
            self.nodes[i] = last
            self._pos[last] = i
        del self.color[u], self.label[u]

    def copy(self) -> "Graph":
        g = Graph(self.directed)
        for u in self.nodes:
            g.add_node(u, self.color[u], self.label[u])
        for u, v in self.edges():
            g.add_edge(u, v)
        g._next = self._next
        return g

    # -- queries -----------------------------------------------------------

    def __len__(self) -> int:
        return len(self.nodes)

    def __contains__(self, u) -> bool:
        return u in self._pos

    @property
    def n_edges(self) -> int:
        return self._m

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.succ[u]

    def neighbors(self, u: int) -> set[int]:
        return self.succ[u]

    def degree(self, u: int) -> int:
        if self.directed:
            return len(self.succ[u]) + len(self.pred[u])
        return len(self.succ[u])

    def followers(self, u: int) -> int:
        return len(self.pred[u])

    def followees(self, u: int) -> int:
        return len(self.succ[u])

    def edges(self) -> Iterator[tuple[int, int]]:
        for u in self.nodes:
            for v in self.succ[u]:
                if self.directed or u < v:
                    yield u, v

    def index(self, u: int) -> int:
        return self._pos[u]

    def degrees(self) -> np.ndarray:
        """Degree of each node, in node-list order."""
        return np.fromiter((self.degree(u) for u in self.nodes), dtype=np.int64, count=len(self.nodes))

    def in_degrees(self) -> np.ndarray:
        return np.fromiter((len(self.pred[u]) for u in self.nodes), dtype=np.int64, count=len(self.nodes))

    def out_degrees(self) -> np.ndarray:
        return np.fromiter((len(self.succ[u]) for u in self.nodes), dtype=np.int64, count=len(self.nodes))

    def degree_histogram(self) -> np.ndarray:
        return np.bincount(self.degrees()) if self.nodes else np.zeros(1, dtype=np.int64)

    def labels(self) -> np.ndarray:
        return np.array([self.label[u] for u in self.nodes])

    def colors(self) -> np.ndarray:
        return np.array([self.color[u] for u in self.nodes], dtype=object)

    def csr(self) -> sparse.csr_matrix:
        """Adjacency (row follows column) over node-list positions."""
        n = len(self.nodes)
        rows, cols = [], []
        for i, u in enumerate(self.nodes):
            nb = self.succ[u]
            rows.extend([i] * len(nb))
            cols.extend(self._pos[v] for v in nb)
        data = np.ones(len(rows))
        return sparse.csr_matrix((data, (rows, cols)), shape=(n, n))

    def check_simple(self) -> None:
        """Assert the structural invariants (no self-loops, symmetric storage)."""
        count = 0
        for u in self.nodes:
            assert u not in self.succ[u], f"self-loop at {u}"
            for v in self.succ[u]:
                assert v in self._pos
                assert u in (self.pred[v] if self.directed else self.succ[v])
            count += len(self.succ[u])
        assert count == (self._m if self.directed else 2 * self._m)


@dataclass(frozen=True)
class DupDelParams:
    """Regime-indexed duplication-deletion parameters and the regime chain.

    The regime chain moves with ``A = I + rho * Q`` per step.
    """

    p_dup: tuple
    q_copy: tuple
    Q: np.ndarray
    rho: float

    def __post_init__(self):
        p = np.asarray(self.p_dup, dtype=float)
        q = np.asarray(self.q_copy, dtype=float)
        Q = np.asarray(self.Q, dtype=float)
        if p.shape != q.shape or Q.shape != (p.size, p.size):
            raise ValueError("parameter vectors and generator must share the regime count")
        if np.any((p < 0) | (p > 1) | (q < 0) | (q > 1)):
            raise ValueError("probabilities must lie in [0, 1]")
        object.__setattr__(self, "p_dup", tuple(p))
        object.__setattr__(self, "q_copy", tuple(q))
        object.__setattr__(self, "Q", Q)
        as_stochastic(self.transition, "I + rho Q")

    @property
    def n_regimes(self) -> int:
        return len(self.p_dup)

    @property
    def transition(self) -> np.ndarray:
        return np.eye(self.n_regimes) + self.rho * self.Q

    @classmethod
    def static(cls, p_dup: float, q_copy: float) -> "DupDelParams":
        return cls((p_dup,), (q_copy,), np.zeros((1, 1)), 0.0)


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# generators


def empty_graph(n: int, directed: bool = False) -> Graph:
    g = Graph(directed)
    for _ in range(n):
        g.add_node()
    return g


def _pair_from_index(k, n):
    # row-major enumeration of pairs i < j
    k = np.asarray(k, dtype=np.int64)
    i = (n - 2 - np.floor(np.sqrt(-8.0 * k + 4.0 * n * (n - 1) - 7) / 2.0 - 0.5)).astype(np.int64)
    j = k + i + 1 - n * (n - 1) // 2 + (n - i) * ((n - i) - 1) // 2
    return i, j


def generate_er(n: int, p: float, seed=None) -> Graph:
    """Undirected Erdos-Renyi ``G(n, p)``."""
    if n < 1 or not 0.0 <= p <= 1.0:
        raise ValueError("need n >= 1 and p in [0, 1]")
    rng = _rng(seed)
    g = empty_graph(n)
    pairs = n * (n - 1) // 2
    k = rng.binomial(pairs, p) if pairs else 0
    if k:
        idx = np.arange(pairs) if k == pairs else rng.choice(pairs, size=k, replace=False)
        for i, j in zip(*_pair_from_index(np.sort(idx), n)):
            g.add_edge(int(i), int(j))
    return g


def configuration_graph(degrees, seed=None) -> Graph:
    """Random stub matching; self-loops and repeated pairs are dropped."""
    rng = _rng(seed)
    deg = np.asarray(degrees, dtype=np.int64)
    g = empty_graph(deg.size)
    stubs = np.repeat(np.arange(deg.size), deg)
    if stubs.size % 2:
        stubs = stubs[:-1]
    rng.shuffle(stubs)
    for u, v in stubs.reshape(-1, 2):
        g.add_edge(int(u), int(v))
    return g


def powerlaw_pmf(gamma: float, d_max: int, d_min: int = 1) -> tuple[np.ndarray, np.ndarray]:
    d = np.arange(d_min, d_max + 1)
    w = d.astype(float) ** -gamma
    return d, w / w.sum()


def generate_powerlaw(n: int, gamma: float, seed=None, d_max: int | None = None) -> Graph:
    """Configuration-model graph with target degrees ``P(d) ~ d^-gamma`` on ``[1, d_max]``.

    ``d_max`` defaults to ``ceil(sqrt(n))``.  An odd stub total is fixed by
    redrawing one node's degree until the total is even.
    """
    if n < 10 and d_max is None:
        raise ValueError("need n >= 10")
    if gamma <= 2:
        raise ValueError("gamma must exceed 2")
    rng = _rng(seed)
    d_max = math.ceil(math.sqrt(n)) if d_max is None else d_max
    support, pmf = powerlaw_pmf(gamma, d_max)
    deg = rng.choice(support, size=n, p=pmf)
    while deg.sum() % 2:
        deg[rng.integers(n)] = rng.choice(support, p=pmf)
    return configuration_graph(deg, rng)


def survival_slope(degrees, d_hi: int | None = None, points: int = 12) -> float:
    """Least-squares slope of ``log P(D > d)`` against ``log d``.

    The survival function is evaluated at ``points`` log-spaced degrees in
    ``[1, d_hi]`` (default: half the largest degree), so the sparse tail does
    not dominate the fit.
    """
    degrees = np.asarray(degrees)
    d_hi = max(2, int(degrees.max()) // 2) if d_hi is None else d_hi
    d = np.unique(np.round(np.geomspace(1, d_hi, points)).astype(int))
    surv = np.array([(degrees > k).mean() for k in d])
    keep = surv > 0
    if keep.sum() < 2:
        raise ValueError("not enough tail mass to fit a slope")
    return float(np.polyfit(np.log(d[keep]), np.log(surv[keep]), 1)[0])


def dup_del_step(g: Graph, params: DupDelParams, theta: int, rng, counts=None) -> Graph:
    """One duplication-or-deletion move, in place; returns ``g``.

    Duplication copies a uniform node ``u``: the newcomer links to ``u`` and
    to each neighbor of ``u`` with probability ``q_copy``.  Deletion removes
    a uniform node with its edges, but never the last node.

    ``counts``, if given, is a degree histogram whose last bin collects all
    larger degrees; it is kept in sync with the graph.
    """
    if not g.nodes:
        raise ValueError("graph is empty")
    top = None if counts is None else counts.size - 1
    u = g.nodes[rng.integers(len(g.nodes))]
    if rng.random() < params.p_dup[theta]:
        nbrs = sorted(g.succ[u])
        keep = rng.random(len(nbrs)) < params.q_copy[theta]
        v = g.add_node()
        g.add_edge(v, u)
        copied = [w for w, k in zip(nbrs, keep) if k]
        for w in copied:
            g.add_edge(v, w)
        if counts is not None:
            for w in [u] + copied:
                d = len(g.succ[w])
                counts[min(d - 1, top)] -= 1
                counts[min(d, top)] += 1
            counts[min(len(g.succ[v]), top)] += 1
    elif len(g.nodes) > 1:
        if counts is not None:
            counts[min(len(g.succ[u]), top)] -= 1
            for w in g.succ[u]:
                d = len(g.succ[w])
                counts[min(d, top)] -= 1
                counts[min(d - 1, top)] += 1
        g.remove_node(u)
    return g


def folded_histogram(degrees, d_trunc: int) -> np.ndarray:
    """Degree counts over ``0..d_trunc`` with larger degrees in the last bin."""
    return np.bincount(np.minimum(np.asarray(degrees, dtype=np.int64), d_trunc), minlength=d_trunc + 1)


def path_graph(n: int) -> Graph:
    g = empty_graph(n)
    for i in range(n - 1):
        g.add_edge(i, i + 1)
    return g


def star_graph(leaves: int) -> Graph:
    """Star ``K_{1,leaves}`` with hub ``0``."""
    g = empty_graph(leaves + 1)
    for i in range(1, leaves + 1):
        g.add_edge(0, i)
    return g


def complete_graph(n: int, directed: bool = False) -> Graph:
    g = empty_graph(n, directed)
    for i in range(n):
        for j in range(n):
            if i != j and (directed or i < j):
                g.add_edge(i, j)
    return g


def cycle_graph(n: int) -> Graph:
    g = path_graph(n)
    g.add_edge(n - 1, 0)
    return g


# ---------------------------------------------------------------------------
# samplers (undirected graphs)


class Sampler:
    """Frozen array view of an undirected graph for fast repeated sampling."""

    def __init__(self, g: Graph):
        if g.directed:
            raise ValueError("samplers work on undirected graphs")
        if not g.nodes:
            raise ValueError("graph is empty")
        A = g.csr()
        self.graph = g
        self.indptr = A.indptr
        self.indices = A.indices
        self.deg = np.diff(A.indptr)
        self.n = len(g.nodes)

    def _need_edges(self):
        if self.indices.size == 0:
            raise NoEdges("graph has no edges")

    def uniform(self, rng, size=None):
        return rng.integers(self.n, size=size)

    def edge_endpoint(self, rng, size=None):
        """Endpoint of a uniform edge: a uniform entry of the adjacency lists."""
        self._need_edges()
        return self.indices[rng.integers(self.indices.size, size=size)]

    def random_friend(self, rng, size=None):
        """Uniform neighbor of a uniform node; isolated draws are redrawn."""
        self._need_edges()
        k = 1 if size is None else int(np.prod(size))
        out = np.empty(k, dtype=np.int64)
        todo = np.arange(k)
        for _ in range(FRIEND_RESAMPLE_CAP):
            u = rng.integers(self.n, size=todo.size)
            ok = self.deg[u] > 0
            u, idx = u[ok], todo[ok]
            off = (rng.random(u.size) * self.deg[u]).astype(np.int64)
            out[idx] = self.indices[self.indptr[u] + off]
            todo = todo[~ok]
            if todo.size == 0:
                break
        else:
            raise NoEdges("could not draw a node with neighbors")
        return int(out[0]) if size is None else out.reshape(size)


def sample_uniform_node(g: Graph, rng, size=None):
    pos = Sampler(g).uniform(rng, size)
    return _ids(g, pos)


def sample_edge_endpoint(g: Graph, rng, size=None):
    return _ids(g, Sampler(g).edge_endpoint(rng, size))


def sample_random_friend(g: Graph, rng, size=None):
    return _ids(g, Sampler(g).random_friend(rng, size))


def _ids(g, pos):
    nodes = np.asarray(g.nodes)
    return int(nodes[pos]) if np.ndim(pos) == 0 else nodes[pos]


def is_connected(g: Graph) -> bool:
    if not g.nodes:
        return False
    ncomp, _ = connected_components(g.csr(), directed=g.directed, connection="weak")
    return ncomp == 1


def random_walk_positions(s: Sampler, burn_in: int, stride: int, count: int, rng) -> np.ndarray:
    if stride < 1 or burn_in < 0 or count < 0:
        raise ValueError("need burn_in >= 0, stride >= 1, count >= 0")
    out = np.empty(count, dtype=np.int64)
    u = int(rng.integers(s.n))
    total = burn_in + stride * count
    draws = rng.random(total)
    k = 0
    for t in range(1, total + 1):
        u = int(s.indices[s.indptr[u] + int(draws[t - 1] * s.deg[u])])
        if t > burn_in and (t - burn_in) % stride == 0:
            out[k] = u
            k += 1
    return out


def random_walk_sample(g: Graph, burn_in: int, stride: int, count: int, seed=None) -> list[int]:
    """Nodes visited by a simple random walk, every ``stride`` steps after ``burn_in``."""
    if not is_connected(g) or g.n_edges == 0:
        raise Disconnected("random walk needs a connected graph with edges")
    rng = _rng(seed)
    pos = random_walk_positions(Sampler(g), burn_in, stride, count, rng)
    return [g.nodes[i] for i in pos]


# ---------------------------------------------------------------------------
# edge-list text format


def write_edgelist(g: Graph, fh: TextIO) -> None:
    if g.directed:
        fh.write("# directed\n")
    for u in sorted(g.nodes):
        if g.color[u] is not None:
            fh.write(f"# color {u} {g.color[u]}\n")
        if g.label[u] is not None:
            fh.write(f"# label {u} {g.label[u]}\n")
    for u in sorted(g.nodes):
        if not g.succ[u]:
            if g.degree(u) == 0:
                fh.write(f"# node {u}\n")
        for v in sorted(g.succ[u]):
            if g.directed or u < v:
                fh.write(f"{u} {v}\n")


def read_edgelist(lines: Iterable[str]) -> Graph:
    lines = list(lines)
    directed = any(l.strip() == "# directed" for l in lines)
    g = Graph(directed)

    def ensure(u):
        if u not in g:
            g.add_node(u)

    for raw in lines:
        parts = raw.split()
        if not parts:
            continue
        if parts[0] == "#":
            if len(parts) == 3 and parts[1] == "node":
                ensure(int(parts[2]))
            elif len(parts) == 4 and parts[1] == "color":
                if parts[3] not in COLORS:
                    raise ValueError(f"unknown color {parts[3]!r}")
                ensure(int(parts[2]))
                g.color[int(parts[2])] = parts[3]
            elif len(parts) == 4 and parts[1] == "label":
                if parts[3] not in ("0", "1"):
                    raise ValueError(f"labels are 0 or 1, got {parts[3]!r}")
                ensure(int(parts[2]))
                g.label[int(parts[2])] = int(parts[3])
            continue
        if len(parts) != 2:
            raise ValueError(f"bad edge line {raw!r}")
        u, v = int(parts[0]), int(parts[1])
        ensure(u)
        ensure(v)
        g.add_edge(u, v)
    return g
