"""Directed preferential attachment with homophily, and glass-ceiling metrics.

Edges point from follower to followee, so ``followers(v)`` is the in-degree
and ``followees(v)`` the out-degree.  Influence is followers / followees.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import EmptyTail, NoConvergence, ZeroDenominator
from .graphs import Graph

BLUE, RED = 0, 1
NAMES = ("blue", "red")
PAGERANK_MAX_ITER = 10_000


@dataclass(frozen=True)
class GceParams:
    """Growth parameters; ``h[new][target]`` indexed by BLUE = 0, RED = 1."""
    b_red: float
    m: int = 2
    h: tuple = ((1.0, 1.0), (1.0, 1.0))
    delta0: float = 1.0
    reciprocal: float = 0.2

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float)
        if not 0.0 < self.b_red < 1.0:
            raise ValueError("b_red must lie in (0, 1)")
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if h.shape != (2, 2) or np.any(h <= 0) or np.any(h > 1):
            raise ValueError("homophily entries must lie in (0, 1]")
        if self.delta0 <= 0:
            raise ValueError("delta0 must be positive")
        if not 0.0 <= self.reciprocal <= 1.0:
            raise ValueError("reciprocal must lie in [0, 1]")
        object.__setattr__(self, "h", tuple(map(tuple, h.tolist())))

    def swapped(self) -> "GceParams":
        """The same model with the two color labels exchanged."""
        h = self.h
        return GceParams(1.0 - self.b_red, self.m, ((h[1][1], h[1][0]), (h[0][1], h[0][0])),
                         self.delta0, self.reciprocal)


def glass_ceiling_params() -> GceParams:
    """Minority red (20%), heterophilic blue, unbiased red."""
    return GceParams(b_red=0.2, m=2, h=((0.1, 1.0), (1.0, 1.0)), delta0=1.0, reciprocal=0.2)


def symmetric_params() -> GceParams:
    return GceParams(b_red=0.5, m=2, h=((1.0, 1.0), (1.0, 1.0)), delta0=1.0, reciprocal=0.2)


class _Urns:
    """Per-color O(1) sampling proportional to followers + delta0."""

    def __init__(self, delta0: float):
        self.delta0 = delta0
        self.nodes = ([], [])  # members of each color
        self.hits = ([], [])  # one entry per follow edge, keyed by followee color

    def weight(self, c: int) -> float:
        return len(self.hits[c]) + self.delta0 * len(self.nodes[c])

    def draw(self, c: int, rng) -> int:
        hits, nodes = self.hits[c], self.nodes[c]
        u = rng.random() * (len(hits) + self.delta0 * len(nodes))
        if u < len(hits):
            return hits[int(u)]
        return nodes[int(rng.random() * len(nodes))]


def seed_graph() -> Graph:
    """One blue and one red node following each other."""
    g = Graph(directed=True)
    g.add_node(0, color="blue")
    g.add_node(1, color="red")
    g.add_edge(0, 1)
    g.add_edge(1, 0)
    return g


def grow_network(params: GceParams, steps: int, seed=None, g: Graph | None = None) -> Graph:
    """Grow ``steps`` new nodes onto ``g`` (default: ``seed_graph()``).

    Each newcomer is red with probability ``b_red`` and follows
    ``min(m, n)`` distinct existing nodes, each drawn with probability
    proportional to ``(followers + delta0) * h[new color][target color]``.
    Every followed node follows back with probability ``reciprocal``.
    """
    rng = np.random.default_rng(seed)
    g = seed_graph() if g is None else g
    if not g.directed:
        raise ValueError("growth needs a directed graph")
    urns = _Urns(params.delta0)
    col = {}
    for u in g.nodes:
        c = NAMES.index(g.color[u])
        col[u] = c
        urns.nodes[c].append(u)
    for u in g.nodes:
        for v in g.succ[u]:
            urns.hits[col[v]].append(v)
    if not urns.nodes[BLUE] or not urns.nodes[RED]:
        raise ValueError("seed graph needs one node of each color")
    h = params.h
    for _ in range(steps):
        c = RED if rng.random() < params.b_red else BLUE
        n = len(g)
        want = min(params.m, n)
        v = g.add_node(color=NAMES[c])
        targets: list[int] = []
        if want == n:
            targets = [u for u in g.nodes if u != v]
        else:
            wb = h[c][BLUE] * urns.weight(BLUE)
            wr = h[c][RED] * urns.weight(RED)
            p_red = wr / (wb + wr)
            tries = 0
            while len(targets) < want:
                tc = RED if rng.random() < p_red else BLUE
                u = urns.draw(tc, rng)
                if u not in targets:
                    targets.append(u)
                tries += 1
                if tries > 200 * want:
                    targets = _exact_draw(g, v, col, params, c, want, rng)
                    break
        for u in targets:
            g.add_edge(v, u)
            urns.hits[col[u]].append(u)
        col[v] = c
        urns.nodes[c].append(v)
        for u in targets:
            if rng.random() < params.reciprocal:
                g.add_edge(u, v)
                urns.hits[c].append(v)
    return g


def _exact_draw(g, v, col, params, c, want, rng):
    """Weighted sampling without replacement, used when rejection stalls."""
    cand = [u for u in g.nodes if u != v]
    w = np.array([(len(g.pred[u]) + params.delta0) * params.h[c][col[u]] for u in cand])
    idx = rng.choice(len(cand), size=want, replace=False, p=w / w.sum())
    return [cand[i] for i in idx]


@dataclass
class InfluenceReport:
    influence: dict  # color -> followers / followees over the group
    ratio: float  # I(blue) / I(red)
    node_influence: dict = field(default_factory=dict)  # node -> followers / followees


def _group_sums(g: Graph):
    fol = {"blue": 0, "red": 0}
    fee = {"blue": 0, "red": 0}
    size = {"blue": 0, "red": 0}
    for u in g.nodes:
        c = g.color[u]
        if c not in fol:
            raise ValueError(f"node {u} has no red/blue color")
        fol[c] += len(g.pred[u])
        fee[c] += len(g.succ[u])
        size[c] += 1
    return fol, fee, size


def node_influence(g: Graph, u: int) -> float:
    """followers / followees; ``inf`` for x/0 with x > 0, ``nan`` for 0/0."""
    a, b = len(g.pred[u]), len(g.succ[u])
    if b == 0:
        return float("inf") if a > 0 else float("nan")
    return a / b


def average_gce(g: Graph) -> InfluenceReport:
    fol, fee, size = _group_sums(g)
    if size["blue"] == 0 or size["red"] == 0:
        raise ValueError("both color groups must be non-empty")
    for c in NAMES:
        if fee[c] == 0:
            raise ZeroDenominator(f"{c} group has no followees; its influence is undefined")
    infl = {c: fol[c] / fee[c] for c in NAMES}
    if infl["red"] == 0:
        raise ZeroDenominator("red influence is zero; ratio undefined")
    nodes = {u: node_influence(g, u) for u in g.nodes}
    return InfluenceReport(infl, infl["blue"] / infl["red"], nodes)


def tail_gce(g: Graph, gamma_t: float) -> float:
    """Prob(blue influence > gamma_t) / Prob(red influence > gamma_t), 0/0 nodes excluded."""
    above = {"blue": 0, "red": 0}
    count = {"blue": 0, "red": 0}
    for u in g.nodes:
        x = node_influence(g, u)
        if x != x:
            continue
        c = g.color[u]
        count[c] += 1
        above[c] += x > gamma_t
    if count["blue"] == 0 or count["red"] == 0:
        raise ValueError("both color groups need nodes with defined influence")
    if above["red"] == 0:
        if above["blue"] == 0:
            raise EmptyTail(f"no node exceeds gamma_t = {gamma_t}")
        return float("inf")
    return (above["blue"] / count["blue"]) / (above["red"] / count["red"])


def pagerank(g: Graph, damping: float = 0.85, tol: float = 1e-12, max_iter: int = PAGERANK_MAX_ITER) -> dict:
    """PageRank over follow edges (rank flows from follower to followee).

    Nodes that follow nobody spread their mass uniformly.  Raises
    NoConvergence if the sup-norm change stays above ``tol``.
    """
    if not 0.0 < damping < 1.0:
        raise ValueError("damping must lie in (0, 1)")
    n = len(g)
    if n == 0:
        return {}
    A = g.csr()
    out = np.asarray(A.sum(axis=1)).ravel()
    dangling = out == 0
    inv = np.where(dangling, 0.0, 1.0 / np.maximum(out, 1))
    M = sparse.diags(inv) @ A  # row-stochastic on non-dangling rows
    MT = M.T.tocsr()
    x = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        nxt = damping * (MT @ x + x[dangling].sum() / n) + (1.0 - damping) / n
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - x)) < tol:
            return dict(zip(g.nodes, nxt.tolist()))
        x = nxt
    raise NoConvergence(f"pagerank did not converge in {max_iter} iterations")


def ratio_trace(params: GceParams, steps: int, seed=None, every: int = 1000) -> list[tuple[int, float]]:
    """Average-GCE ratio I(blue)/I(red) every ``every`` growth steps."""
    rng = np.random.default_rng(seed)
    g = seed_graph()
    rows = []
    done = 0
    while done < steps:
        k = min(every, steps - done)
        grow_network(params, k, rng, g)
        done += k
        rows.append((done, average_gce(g).ratio))
    return rows


def gce_study(params: GceParams, runs: int, steps: int, seed=None) -> np.ndarray:
    """Final average-GCE ratio of ``runs`` independent growth runs."""
    children = np.random.SeedSequence(seed).spawn(runs)
    return np.array([average_gce(grow_network(params, steps, c)).ratio for c in children])


def counterexample_grid():
    """Candidates with heterophilic blue (h[blue][red] = 1 > h[blue][blue]), in sweep order."""
    for b_red in (0.2, 0.35, 0.5):
        for h_bb in (0.1, 0.5):
            for h_rr in (1.0, 0.5, 0.1):
                yield GceParams(b_red, 2, ((h_bb, 1.0), (1.0, h_rr)), 1.0, 0.2)


def find_counterexample(runs: int = 10, steps: int = 20_000, seed=None, band=(0.8, 1.25)):
    """First heterophilic-blue parameter set whose ratio stays inside ``band`` in every run.

    Returns ``(params, ratios)`` or ``None``.
    """
    lo, hi = band
    for p in counterexample_grid():
        r = gce_study(p, runs, steps, seed)
        if np.all((r >= lo) & (r <= hi)):
            return p, r
    return None
