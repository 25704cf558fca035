"""Intent, expectation and friendship-paradox (NEP) polling on labeled graphs.

Every node carries a binary label ``f(v)``; the target is the fraction of
1-labels.  Polls sample nodes with replacement:

* intent polling asks a uniform node for its own label;
* expectation polling asks a uniform node what it expects the winner to be
  (majority over its closed neighborhood, own label on exact ties);
* NEP asks a node sampled by the friendship paradox (edge endpoint ``Y``,
  random friend ``Z`` or random walk) for the fraction of its friends
  labeled 1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import Disconnected, NoEdges
from .graphs import Graph, Sampler, is_connected, random_walk_positions
from .probability import fosd_dominates

METHODS = ("intent", "expectation", "nep-Y", "nep-Z", "nep-walk")


@dataclass(frozen=True)
class PollEstimate:
    estimate: float
    k: int
    method: str


def label_vector(g: Graph) -> np.ndarray:
    f = g.labels()
    if any(x is None for x in f):
        raise ValueError("every node needs a 0/1 label")
    f = f.astype(np.int64)
    if np.any((f != 0) & (f != 1)):
        raise ValueError("labels must be 0 or 1")
    return f


def true_fraction(g: Graph) -> float:
    if len(g) == 0:
        raise ValueError("graph is empty")
    return float(label_vector(g).mean())


class Poller:
    """Per-node responses and samplers of one labeled undirected graph."""

    def __init__(self, g: Graph):
        self.graph = g
        self.f = label_vector(g).astype(float)
        self.s = Sampler(g)
        A = g.csr()
        ones = A @ self.f
        deg = self.s.deg
        with np.errstate(invalid="ignore", divide="ignore"):
            self.nep = np.where(deg > 0, ones / np.maximum(deg, 1), np.nan)
        closed = (ones + self.f) / (deg + 1)
        self.ep = np.where(closed > 0.5, 1.0, np.where(closed < 0.5, 0.0, self.f))

    def draw(self, method: str, rng, size, *, burn_in: int = 100, stride: int = 5) -> np.ndarray:
        """Node positions of ``size`` samples for ``method``."""
        if method in ("intent", "expectation"):
            return self.s.uniform(rng, size)
        if method == "nep-Y":
            return self.s.edge_endpoint(rng, size)
        if method == "nep-Z":
            return self.s.random_friend(rng, size)
        if method == "nep-walk":
            if self.s.indices.size == 0:
                raise NoEdges("graph has no edges")
            if not is_connected(self.graph):
                raise Disconnected("random-walk polling needs a connected graph")
            shape = (size,) if np.ndim(size) == 0 else tuple(size)
            rows = int(np.prod(shape[:-1]))
            out = [random_walk_positions(self.s, burn_in, stride, shape[-1], rng) for _ in range(rows)]
            return np.array(out).reshape(shape)
        raise ValueError(f"unknown method {method!r}")

    def responses(self, method: str) -> np.ndarray:
        if method == "intent":
            return self.f
        if method == "expectation":
            return self.ep
        return self.nep

    def poll(self, method: str, k: int, rng, trials: int | None = None, **kw):
        """One estimate, or an array of ``trials`` independent estimates."""
        if k < 1:
            raise ValueError("k must be >= 1")
        shape = (k,) if trials is None else (trials, k)
        est = self.responses(method)[self.draw(method, rng, shape, **kw)].mean(axis=-1)
        return float(est) if trials is None else est


def intent_poll(g: Graph, k: int, seed=None) -> PollEstimate:
    return PollEstimate(Poller(g).poll("intent", k, np.random.default_rng(seed)), k, "intent")


def expectation_poll(g: Graph, k: int, seed=None) -> PollEstimate:
    return PollEstimate(Poller(g).poll("expectation", k, np.random.default_rng(seed)), k, "expectation")


def nep_poll(g: Graph, k: int, sampler: str = "Y", seed=None, **kw) -> PollEstimate:
    """Friendship-paradox poll; ``sampler`` is ``"Y"``, ``"Z"`` or ``"walk"``."""
    method = f"nep-{sampler}"
    if method not in METHODS:
        raise ValueError(f"unknown sampler {sampler!r}")
    return PollEstimate(Poller(g).poll(method, k, np.random.default_rng(seed), **kw), k, method)


def nep_y_expectation(g: Graph) -> float:
    """Exact mean NEP(Y) response: sum over edge endpoints, the degree-weighted label mean."""
    f = label_vector(g).astype(float)
    deg = g.degrees().astype(float)
    if deg.sum() == 0:
        raise NoEdges("graph has no edges")
    return float(f @ deg / deg.sum())


# ---------------------------------------------------------------------------
# friendship paradox


@dataclass(frozen=True)
class ParadoxReport:
    y_dominates: bool
    z_dominates: bool
    mean_x: float
    mean_y: float
    mean_z: float
    law_x: np.ndarray
    law_y: np.ndarray
    law_z: np.ndarray


def degree_laws(g: Graph):
    """Exact degree laws of a uniform node X, an edge endpoint Y and a random friend Z.

    Z is a uniform neighbor of a uniform non-isolated node.
    """
    if g.directed:
        raise ValueError("the friendship paradox is stated for undirected graphs")
    s = Sampler(g)
    s._need_edges()
    deg = s.deg
    size = deg.max() + 1
    law_x = np.bincount(deg, minlength=size) / deg.size
    law_y = np.bincount(deg, weights=deg, minlength=size) / deg.sum()
    owner = np.repeat(np.arange(s.n), deg)
    w = 1.0 / deg[owner]
    law_z = np.bincount(deg[s.indices], weights=w, minlength=size) / np.count_nonzero(deg)
    return law_x, law_y, law_z


def friendship_paradox_check(g: Graph) -> ParadoxReport:
    lx, ly, lz = degree_laws(g)
    d = np.arange(lx.size)
    return ParadoxReport(fosd_dominates(ly, lx), fosd_dominates(lz, lx),
                         float(d @ lx), float(d @ ly), float(d @ lz), lx, ly, lz)


# ---------------------------------------------------------------------------
# comparison harness


def assortativity(g: Graph) -> float:
    """Degree assortativity: Pearson correlation of degrees across edge ends."""
    s = Sampler(g)
    s._need_edges()
    owner = np.repeat(np.arange(s.n), s.deg)
    a, b = s.deg[owner].astype(float), s.deg[s.indices].astype(float)
    if a.std() == 0:
        return float("nan")
    return float(np.corrcoef(a, b)[0, 1])


def degree_label_correlation(g: Graph) -> float:
    f = label_vector(g).astype(float)
    d = g.degrees().astype(float)
    if f.std() == 0 or d.std() == 0:
        return float("nan")
    return float(np.corrcoef(d, f)[0, 1])


@dataclass(frozen=True)
class MseRow:
    method: str
    k: int
    bias: float
    variance: float
    mse: float
    r: float
    rho: float


def mse_compare(g: Graph, k: int, trials: int, seed=None,
                methods=("intent", "expectation", "nep-Y", "nep-Z"), **kw) -> list[MseRow]:
    """Monte Carlo bias, variance and MSE of each method against the true fraction."""
    truth = true_fraction(g)
    poller = Poller(g)
    r = assortativity(g) if g.n_edges else float("nan")
    rho = degree_label_correlation(g)
    rows = []
    streams = np.random.SeedSequence(seed).spawn(len(methods))
    for method, ss in zip(methods, streams):
        est = poller.poll(method, k, np.random.default_rng(ss), trials=trials, **kw)
        err = est - truth
        rows.append(MseRow(method, k, float(err.mean()), float(est.var()), float(np.mean(err ** 2)), r, rho))
    return rows


def er_poll_fixture(n: int = 1000, mean_degree: float = 10.0, p1: float = 0.3, seed=0) -> Graph:
    """ER graph with labels drawn independently of the structure."""
    from .graphs import generate_er

    rng = np.random.default_rng(seed)
    g = generate_er(n, mean_degree / (n - 1), rng)
    for u in g.nodes:
        g.label[u] = int(rng.random() < p1)
    return g


def degree_correlated_fixture(n: int = 1000, mean_degree: float = 10.0, top: float = 0.3, seed=0) -> Graph:
    """ER graph whose highest-degree ``top`` fraction is labeled 1."""
    from .graphs import generate_er

    rng = np.random.default_rng(seed)
    g = generate_er(n, mean_degree / (n - 1), rng)
    deg = g.degrees()
    order = np.argsort(-deg, kind="stable")
    ones = set(order[: int(round(top * n))].tolist())
    for i, u in enumerate(g.nodes):
        g.label[u] = int(i in ones)
    return g
