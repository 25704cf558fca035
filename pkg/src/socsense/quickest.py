"""Stopping-time problems on a one-dimensional belief grid.

All problems here have two states.  State ``0`` is "change" and is
absorbing; state ``1`` is "no change" and jumps to state ``0`` with hazard
``eps`` per step.  Beliefs are indexed by ``g = pi(change)`` on a uniform grid
over ``[0, 1]``, so the classical stopping set is an interval ``[g*, 1]``.

Updated beliefs rarely land on grid points; the value function is linearly
interpolated there.  Each solver precomputes, for every grid point, the list
of possible next beliefs with their probabilities as sparse interpolation
matrices, after which one Bellman sweep is a handful of sparse products.
"""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

from .errors import DimensionMismatch, NoConvergence
from .probability import _check_alpha
from .social_learning import (
    SocialLearningModel,
    hmm_posteriors_batch,
    predict_batch,
    social_update_batch,
)

MAX_ITER = 100_000
TIE_TOL = 1e-12


@dataclass(frozen=True)
class ChangeModel:
    """Change-detection problem with delay cost ``d`` and false-alarm cost ``f``."""

    eps: float
    obs: np.ndarray
    d: float
    f: float
    rho: float = 1.0

    def __post_init__(self):
        B = np.asarray(self.obs, dtype=float)
        if B.ndim != 2 or B.shape[0] != 2:
            raise DimensionMismatch("change models have exactly two states")
        if not 0.0 < self.eps < 1.0:
            raise ValueError("eps must lie in (0, 1)")
        if self.d < 0 or self.f < 0:
            raise ValueError("costs must be nonnegative")
        if not 0.0 < self.rho <= 1.0:
            raise ValueError("discount must lie in (0, 1]")
        object.__setattr__(self, "obs", B)

    @property
    def transition(self) -> np.ndarray:
        return np.array([[1.0, 0.0], [self.eps, 1.0 - self.eps]])

    def social_model(self, costs) -> SocialLearningModel:
        return SocialLearningModel(self.transition, self.obs, costs)


@dataclass(frozen=True)
class BeliefUpdateRule:
    """How the global decision maker's belief moves between stages.

    ``kind`` is ``"classical"`` (it sees the raw observation), ``"social"``
    (it sees only the myopic action of a local agent with cost matrix
    ``costs``) or ``"cvar-social"`` (local agents use CVaR at level ``alpha``).
    """

    kind: str = "classical"
    costs: np.ndarray | None = None
    alpha: float = 1.0

    def __post_init__(self):
        if self.kind not in ("classical", "social", "cvar-social"):
            raise ValueError(f"unknown update rule {self.kind!r}")
        if self.kind != "classical" and self.costs is None:
            raise ValueError("social rules need agent costs")
        _check_alpha(self.alpha)

    @property
    def agent_alpha(self) -> float:
        return self.alpha if self.kind == "cvar-social" else 1.0


@dataclass
class GridSolution:
    grid: np.ndarray
    value: np.ndarray
    policy: np.ndarray  # True = stop
    iterations: int
    residual: float
    residuals: list = field(default_factory=list, repr=False)
    price: np.ndarray | None = None

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        header = ["pi1", "value", "policy"] + (["price"] if self.price is not None else [])
        w.writerow(header)
        for i, g in enumerate(self.grid):
            row = [f"{g:.10g}", f"{self.value[i]:.12g}", "stop" if self.policy[i] else "continue"]
            if self.price is not None:
                row.append(f"{self.price[i]:.10g}")
            w.writerow(row)


def belief_grid(n: int) -> np.ndarray:
    if n < 2:
        raise ValueError("grid needs at least two points")
    return np.linspace(0.0, 1.0, n)


def interpolation_matrix(points, n: int) -> sparse.csr_matrix:
    """Sparse ``(len(points), n)`` matrix that linearly interpolates grid values."""
    x = np.clip(np.asarray(points, dtype=float).ravel(), 0.0, 1.0) * (n - 1)
    lo = np.minimum(np.floor(x).astype(int), n - 2)
    w = x - lo
    rows = np.repeat(np.arange(x.size), 2)
    cols = np.column_stack([lo, lo + 1]).ravel()
    vals = np.column_stack([1.0 - w, w]).ravel()
    return sparse.csr_matrix((vals, (rows, cols)), shape=(x.size, n))


@dataclass
class _Branches:
    """Next-belief interpolation per branch plus branch probabilities."""

    W: list  # one (G, G) sparse matrix per branch
    prob: np.ndarray  # (G, nbranch)

    def expect(self, V):
        return sum(self.prob[:, b] * (self.W[b] @ V) for b in range(len(self.W)))

    def values(self, V):
        return np.column_stack([W @ V for W in self.W])

    def matrix(self):
        return sum(sparse.diags(self.prob[:, b]) @ self.W[b] for b in range(len(self.W)))


def _branches_from(post, prob, grid) -> _Branches:
    # post: (G, nb, 2), prob: (G, nb); impossible branches point back at self
    nxt = np.where(prob > 0, post[..., 0], grid[:, None])
    nxt = np.nan_to_num(nxt, nan=0.0)
    n = grid.size
    W = [interpolation_matrix(nxt[:, b], n) for b in range(prob.shape[1])]
    return _Branches(W, np.where(prob > 0, prob, 0.0))


def _pis(grid):
    return np.column_stack([grid, 1.0 - grid])


def update_branches(cm: ChangeModel, rule: BeliefUpdateRule, grid) -> _Branches:
    pis = _pis(grid)
    if rule.kind == "classical":
        m = cm.social_model(np.zeros((2, 2)))
        post, py = hmm_posteriors_batch(m, pis)
        return _branches_from(post, py, grid)
    m = cm.social_model(rule.costs)
    post, sigma = social_update_batch(m, pis, rule.agent_alpha)
    return _branches_from(post, sigma, grid)


def _iterate(stop, continuation, n, tol, max_iter, prefer_stop=True):
    """Value iteration ``V <- min(stop, continuation(V))`` from ``V = 0``."""
    V = np.zeros(n)
    residuals = []
    for it in range(1, max_iter + 1):
        cont = continuation(V)
        V_new = np.minimum(stop, cont)
        res = float(np.max(np.abs(V_new - V)))
        residuals.append(res)
        V = V_new
        if res <= tol:
            cont = continuation(V)
            scale = max(1.0, float(np.max(np.abs(stop))))
            policy = stop <= cont + TIE_TOL * scale
            return V, policy, it, res, residuals
    raise NoConvergence(f"value iteration residual {res:.3g} > {tol:g} after {max_iter} sweeps")


def solve_stopping(cm: ChangeModel, rule: BeliefUpdateRule, grid_size: int = 1001,
                   tol: float = 1e-10, max_iter: int = MAX_ITER) -> GridSolution:
    """Kolmogorov-Shiryaev stopping problem with the given belief update.

    Stop costs ``f * pi(no change)``; continuing costs ``d * pi(change)`` plus
    the (discounted) expected interpolated value at the next belief.
    Exact ties go to stop.
    """
    if grid_size < 11:
        raise ValueError("grid_size must be at least 11")
    if tol <= 0:
        raise ValueError("tol must be positive")
    g = belief_grid(grid_size)
    br = update_branches(cm, rule, g)
    M = br.matrix().tocsr()
    stop = cm.f * (1.0 - g)
    delay = cm.d * g
    V, pol, it, res, hist = _iterate(stop, lambda V: delay + cm.rho * (M @ V), grid_size, tol, max_iter)
    return GridSolution(g, V, pol, it, res, hist)


def _cvar_of_branches(vals, prob, alpha):
    # z ranges over the branch values; objective[g, k] uses z = vals[g, k]
    excess = np.maximum(vals[:, None, :] - vals[:, :, None], 0.0)  # [g, k, b]
    obj = vals + np.einsum("gkb,gb->gk", excess, prob) / alpha
    return obj.min(axis=1)


def solve_cvar_stopping(cm: ChangeModel, rule: BeliefUpdateRule, alpha: float,
                        grid_size: int = 1001, tol: float = 1e-10,
                        max_iter: int = MAX_ITER) -> GridSolution:
    """Stopping problem whose continuation is the CVaR of the next value.

    A single ``z`` is shared by all branches at a belief; it is searched over
    the branch values, where the piecewise-linear objective attains its
    minimum.
    """
    alpha = _check_alpha(alpha)
    if grid_size < 11:
        raise ValueError("grid_size must be at least 11")
    g = belief_grid(grid_size)
    br = update_branches(cm, rule, g)
    stop = cm.f * (1.0 - g)
    delay = cm.d * g

    def cont(V):
        return delay + cm.rho * _cvar_of_branches(br.values(V), br.prob, alpha)

    V, pol, it, res, hist = _iterate(stop, cont, grid_size, tol, max_iter)
    return GridSolution(g, V, pol, it, res, hist)


def stopping_set(sol: GridSolution | np.ndarray) -> list[tuple[float, float]]:
    """Maximal runs of stop decisions as ``(first, last)`` grid values."""
    if isinstance(sol, GridSolution):
        grid, pol = sol.grid, np.asarray(sol.policy, dtype=bool)
    else:
        pol = np.asarray(sol, dtype=bool)
        grid = belief_grid(pol.size)
    padded = np.concatenate([[False], pol, [False]]).astype(int)
    edges = np.flatnonzero(np.diff(padded))
    return [(float(grid[a]), float(grid[b - 1])) for a, b in zip(edges[::2], edges[1::2])]


# ---------------------------------------------------------------------------
# regime sweep


@dataclass(frozen=True)
class SweepPoint:
    d: float
    f: float
    eps: float
    costs: tuple

    def change_model(self, obs) -> ChangeModel:
        return ChangeModel(self.eps, obs, self.d, self.f)

    def rule(self) -> BeliefUpdateRule:
        return BeliefUpdateRule("social", np.array(self.costs, dtype=float))


def default_sweep():
    """Parameter ranges searched for a disconnected social-learning stopping set."""
    return {
        "d": (0.02, 0.05, 0.1, 0.2),
        "f": (1.0, 2.0, 3.0, 5.0),
        "eps": (0.02, 0.05, 0.1, 0.2),
        "costs": (
            ((0.0, 2.0), (1.0, 0.0)),
            ((0.0, 1.0), (1.0, 0.0)),
            ((0.0, 1.0), (2.0, 0.0)),
            ((0.0, 1.0), (3.0, 0.0)),
            ((0.0, 3.0), (1.0, 0.0)),
        ),
    }


def sweep_points(sweep) -> Iterable[SweepPoint]:
    for costs, eps, d, f in itertools.product(sweep["costs"], sweep["eps"], sweep["d"], sweep["f"]):
        yield SweepPoint(float(d), float(f), float(eps), tuple(tuple(map(float, r)) for r in costs))


def find_disconnected_regime(obs, sweep=None, grid_size: int = 201, rule_kind: str = "social",
                             confirm_grids: Sequence[int] = (), tol: float = 1e-9):
    """First sweep point whose stopping set has two or more intervals.

    ``obs`` is the local agents' observation kernel.  Points are visited in
    the deterministic order costs, eps, d, f.  Each grid in ``confirm_grids``
    must reproduce the same number of intervals, which screens out
    fragments that only appear at one resolution.  Returns
    ``(point, solution)`` or ``None``.
    """
    sweep = default_sweep() if sweep is None else sweep
    for pt in sweep_points(sweep):
        cm = pt.change_model(obs)
        rule = pt.rule() if rule_kind == "social" else BeliefUpdateRule("classical")
        sol = solve_stopping(cm, rule, grid_size, tol)
        count = len(stopping_set(sol))
        if count < 2:
            continue
        if any(len(stopping_set(solve_stopping(cm, rule, n, tol))) != count for n in confirm_grids):
            continue
        return pt, sol
    return None


# ---------------------------------------------------------------------------
# quickest herding


def solve_quickest_herding(m: SocialLearningModel, rho: float, grid_size: int = 1001,
                           tol: float = 1e-10, max_iter: int = MAX_ITER) -> GridSolution:
    """When should agents stop revealing their observations and herd?

    Continuing (no privacy) means the agent announces its observation, so the
    action set is the observation set.  Stopping (full privacy) means every
    later agent takes the myopic action ``argmin_a c_a' pi`` forever.
    """
    if m.X != 2:
        raise DimensionMismatch("quickest herding is solved for two states")
    if m.A != m.Y:
        raise DimensionMismatch("revealing the observation needs as many actions as observations")
    if not 0.0 < rho < 1.0:
        raise ValueError("discount must lie in (0, 1)")
    g = belief_grid(grid_size)
    pis = _pis(g)
    stop = (pis @ m.costs).min(axis=1) / (1.0 - rho)
    pred = predict_batch(m, pis)
    # E[c(x, y)] with x from the predicted belief and y ~ B(x, .)
    reveal = pred @ np.sum(m.obs * m.costs, axis=1)
    post, py = hmm_posteriors_batch(m, pis)
    br = _branches_from(post, py, g)
    M = br.matrix().tocsr()
    V, pol, it, res, hist = _iterate(stop, lambda V: reveal + rho * (M @ V), grid_size, tol, max_iter)
    return GridSolution(g, V, pol, it, res, hist)


# ---------------------------------------------------------------------------
# pricing of information


@dataclass(frozen=True)
class PricingModel:
    """Price menu, reveal probability per price, accuracy weight and discount."""

    prices: np.ndarray
    reveal: np.ndarray
    beta: float
    rho: float

    def __post_init__(self):
        p = np.asarray(self.prices, dtype=float)
        q = np.asarray(self.reveal, dtype=float)
        if p.ndim != 1 or p.shape != q.shape or p.size == 0:
            raise DimensionMismatch("prices and reveal probabilities must be matching vectors")
        if np.any(np.diff(p) <= 0):
            raise ValueError("prices must be distinct and ascending")
        if np.any(np.diff(q) < 0) or np.any(q < 0) or np.any(q > 1):
            raise ValueError("reveal probability must be nondecreasing in price and lie in [0, 1]")
        if self.beta < 0 or not 0.0 < self.rho < 1.0:
            raise ValueError("need beta >= 0 and discount in (0, 1)")
        object.__setattr__(self, "prices", p)
        object.__setattr__(self, "reveal", q)


def _pricing_branches(m: SocialLearningModel, g):
    pis = _pis(g)
    post, py = hmm_posteriors_batch(m, pis)
    reveal = _branches_from(post, py, g).matrix().tocsr()
    herd = interpolation_matrix(predict_batch(m, pis)[:, 0], g.size)
    return reveal, herd


def solve_pricing(pm: PricingModel, m: SocialLearningModel, grid_size: int = 501,
                  tol: float = 1e-10, max_iter: int = MAX_ITER) -> GridSolution:
    """Minimum expected payment plus inaccuracy; ties go to the cheapest price.

    At price ``p`` the agent reveals its observation with probability
    ``q(p)`` (and is paid ``p``); otherwise it herds and the public belief
    only drifts with the state dynamics.
    """
    if m.X != 2:
        raise DimensionMismatch("pricing is solved for two states")
    g = belief_grid(grid_size)
    R, H = _pricing_branches(m, g)
    inacc = pm.beta * (1.0 - np.maximum(g, 1.0 - g))
    pay = pm.prices * pm.reveal

    def q_values(V):
        vr, vh = R @ V, H @ V
        return inacc[:, None] + pay + pm.rho * (pm.reveal * vr[:, None] + (1.0 - pm.reveal) * vh[:, None])

    V = np.zeros(grid_size)
    hist = []
    for it in range(1, max_iter + 1):
        V_new = q_values(V).min(axis=1)
        res = float(np.max(np.abs(V_new - V)))
        hist.append(res)
        V = V_new
        if res <= tol:
            Q = q_values(V)
            scale = max(1.0, float(np.max(np.abs(Q))))
            best = np.argmax(Q <= Q.min(axis=1, keepdims=True) + TIE_TOL * scale, axis=1)
            price = pm.prices[best]
            return GridSolution(g, V, np.zeros(grid_size, bool), it, res, hist, price=price)
    raise NoConvergence(f"pricing iteration residual {res:.3g} > {tol:g} after {max_iter} sweeps")


def simulate_prices(sol: GridSolution, pm: PricingModel, m: SocialLearningModel, trials: int,
                    horizon: int, rng, prior=(0.5, 0.5)):
    """Price and belief paths under the solved policy.

    Returns ``(prices, cells)`` with shape ``(trials, horizon)``: the price
    paid at step ``k`` and the grid cell of the public belief it was set from.
    """
    n = sol.grid.size
    prior = np.asarray(prior, dtype=float)
    x = (rng.random(trials) >= prior[0]).astype(int)
    g = np.full(trials, prior[0])
    prices = np.empty((trials, horizon))
    cells = np.empty((trials, horizon), dtype=int)
    P, B = m.transition, m.obs
    level = {p: i for i, p in enumerate(pm.prices)}
    for k in range(horizon):
        cell = np.rint(g * (n - 1)).astype(int)
        p = sol.price[cell]
        q = pm.reveal[[level[v] for v in p]]
        cells[:, k] = cell
        prices[:, k] = p
        x = (rng.random(trials) >= P[x, 0]).astype(int)
        pred0 = g * P[0, 0] + (1.0 - g) * P[1, 0]
        u = rng.random(trials)
        y = (u[:, None] >= np.cumsum(B[x], axis=1)).sum(axis=1)
        y = np.minimum(y, B.shape[1] - 1)
        num = B[0, y] * pred0
        den = num + B[1, y] * (1.0 - pred0)
        revealed = rng.random(trials) < q
        g = np.where(revealed, num / den, pred0)
    return prices, cells


def verify_supermartingale(sol: GridSolution, pm: PricingModel, m: SocialLearningModel,
                           trials: int = 10_000, seed=0, horizon: int = 20, prior=(0.5, 0.5)):
    """Check ``E[p_{k+1} | info when p_k was set] <= p_k`` along simulated paths.

    Trials are grouped by ``(k, cell of the belief that set p_k)``; within a
    group ``p_k`` is fixed and the mean of ``p_{k+1}`` is compared with it,
    allowing two standard errors.  Returns ``(violation fraction, mean price
    per step)``.
    """
    rng = np.random.default_rng(seed)
    prices, cells = simulate_prices(sol, pm, m, trials, horizon, rng, prior)
    checked = violated = 0
    for k in range(horizon - 1):
        order = np.argsort(cells[:, k], kind="stable")
        keys = cells[order, k]
        starts = np.flatnonzero(np.r_[True, keys[1:] != keys[:-1]])
        for grp in np.split(order, starts[1:]):
            nxt = prices[grp, k + 1]
            se = nxt.std(ddof=1) / np.sqrt(nxt.size) if nxt.size > 1 else 0.0
            checked += 1
            if nxt.mean() > prices[grp[0], k] + 2 * se + 1e-12:
                violated += 1
    return violated / max(checked, 1), prices.mean(axis=0)
