"""Constant step-size tracking of a graph's degree distribution.

The tracker sees the degree ``Y_k`` of one uniformly sampled node per step
and updates

    D_{k+1} = D_k + eps * (e_{Y_k} - D_k),

a convex combination, so the estimate never leaves the simplex.  Degrees
above ``d_trunc`` are folded into the last bin.

The graph evolves by duplication-deletion moves whose parameters switch
with a slow Markov regime ``theta``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .graphs import DupDelParams, Graph, dup_del_step, folded_histogram, generate_er

D_TRUNC = 200


@dataclass(frozen=True)
class DegreeDistribution:
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("degree distribution must be a probability vector")
        object.__setattr__(self, "probs", p)

    @property
    def d_trunc(self) -> int:
        return self.probs.size - 1

    @classmethod
    def point(cls, degree: int, d_trunc: int = D_TRUNC) -> "DegreeDistribution":
        p = np.zeros(d_trunc + 1)
        p[min(degree, d_trunc)] = 1.0
        return cls(p)

    @classmethod
    def from_degrees(cls, degrees, d_trunc: int = D_TRUNC) -> "DegreeDistribution":
        h = folded_histogram(degrees, d_trunc)
        return cls(h / h.sum())


@dataclass(frozen=True)
class TrackerState:
    estimate: DegreeDistribution
    eps: float
    count: int = 0


def tracker_step(state: TrackerState, observed_degree: int) -> TrackerState:
    """One stochastic-approximation update with the observed degree."""
    p = state.estimate.probs
    y = min(int(observed_degree), p.size - 1)
    new = (1.0 - state.eps) * p
    new[y] += state.eps
    return replace(state, estimate=DegreeDistribution(new), count=state.count + 1)


@dataclass
class TrackingRun:
    epochs: np.ndarray  # step index of each recorded error
    errors: np.ndarray  # squared l2 error at each recorded step
    regimes: np.ndarray  # regime at each recorded step
    final: DegreeDistribution
    switches: np.ndarray  # steps at which the regime changed
    mean_estimate: np.ndarray | None = None  # time average after ``average_after``


def start_graph(n0: int, mean_degree: float, rng) -> Graph:
    return generate_er(n0, min(1.0, mean_degree / max(n0 - 1, 1)), rng)


def stationary_law(params: DupDelParams, theta: int, steps: int, seed=None, n0: int = 1000,
                   burn_in: int | None = None, every: int = 100, d_trunc: int = D_TRUNC) -> np.ndarray:
    """Long-run degree law of the frozen regime ``theta`` (time-averaged histogram)."""
    rng = np.random.default_rng(seed)
    q = params.q_copy[theta]
    g = start_graph(n0, 1.0 / max(1e-9, 1.0 - q), rng)
    counts = folded_histogram(g.degrees(), d_trunc)
    burn_in = steps // 5 if burn_in is None else burn_in
    acc = np.zeros(d_trunc + 1)
    for k in range(steps):
        dup_del_step(g, params, theta, rng, counts)
        if k >= burn_in and (k - burn_in) % every == 0:
            acc += counts / counts.sum()
    return acc / acc.sum()


def run_tracking(params: DupDelParams, eps: float, horizon: int, seed=None, *,
                 laws: np.ndarray | None = None, n0: int = 1000, graph: Graph | None = None,
                 theta0: int = 0, record_every: int = 10, d_trunc: int = D_TRUNC,
                 average_after: int | None = None) -> TrackingRun:
    """Co-simulate regime chain, graph, uniform degree sampling and tracker.

    The error at step ``k`` is ``||D_ref - D_k||^2``.  With ``laws`` (one row
    per regime) the reference is the pre-computed law of the current regime;
    without it the reference is the exact degree law of the current graph.
    The tracker starts at the point mass on the first sampled degree.  With
    ``average_after`` the estimates of later steps are also averaged.
    """
    if not 0.0 < eps <= 1.0:
        raise ValueError("eps must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    if graph is None:
        q = params.q_copy[theta0]
        graph = start_graph(n0, 1.0 / max(1e-9, 1.0 - q), rng)
    g = graph
    counts = folded_histogram(g.degrees(), d_trunc)
    A = params.transition
    cum = np.cumsum(A, axis=1)
    theta = theta0
    n_rec = horizon // record_every
    epochs = np.empty(n_rec, dtype=np.int64)
    errors = np.empty(n_rec)
    regimes = np.empty(n_rec, dtype=np.int64)
    switches = []
    # D = scale * w keeps each update O(1); rescaled before underflow
    w = np.zeros(d_trunc + 1)
    scale = 1.0
    first = True
    acc = np.zeros(d_trunc + 1) if average_after is not None else None
    decay = 1.0 - eps
    j = 0
    for k in range(1, horizon + 1):
        if params.rho > 0:
            nxt = int(np.searchsorted(cum[theta], rng.random(), side="right"))
            nxt = min(nxt, A.shape[0] - 1)
            if nxt != theta:
                switches.append(k)
                theta = nxt
        dup_del_step(g, params, theta, rng, counts)
        y = min(len(g.succ[g.nodes[int(rng.integers(len(g.nodes)))]]), d_trunc)
        if first:
            w[y] = 1.0
            first = False
        else:
            scale *= decay
            w[y] += eps / scale
            if scale < 1e-200:
                w *= scale
                scale = 1.0
        if acc is not None and k > average_after:
            acc += w * scale
        if k % record_every == 0:
            est = w * scale
            ref = laws[theta] if laws is not None else counts / counts.sum()
            epochs[j], errors[j], regimes[j] = k, float(np.sum((ref - est) ** 2)), theta
            j += 1
    est = w * scale
    mean = acc / max(1, horizon - average_after) if acc is not None else None
    return TrackingRun(epochs, errors, regimes, DegreeDistribution(est / est.sum()),
                       np.array(switches, dtype=np.int64), mean)


def step_size_scaling(params: DupDelParams, eps_list, trials: int, seed=None, *, n0: int = 10_000,
                      burn_factor: float = 8.0, window_factor: float = 40.0, record_every: int = 5):
    """Mean steady-state squared error per step size and the log-log slope.

    Each trial runs ``burn_factor / eps`` steps to forget the start, then
    averages the error over ``window_factor / eps`` steps.  The reference is
    the current graph's exact degree law.  Returns ``(rows, slope)`` with rows
    ``(eps, mse)``; the slope is ``None`` for a single step size.
    """
    eps_list = [float(e) for e in eps_list]
    if not eps_list or any(not 0.0 < e <= 1.0 for e in eps_list):
        raise ValueError("step sizes must lie in (0, 1]")
    ss = np.random.SeedSequence(seed)
    children = ss.spawn(len(eps_list) * trials)
    rows = []
    for i, eps in enumerate(eps_list):
        burn = int(np.ceil(burn_factor / eps))
        window = int(np.ceil(window_factor / eps))
        vals = []
        for t in range(trials):
            run = run_tracking(params, eps, burn + window, children[i * trials + t], n0=n0,
                               record_every=record_every)
            vals.append(run.errors[run.epochs > burn].mean())
        rows.append((eps, float(np.mean(vals))))
    slope = None
    if len(rows) > 1:
        e, m = np.log(np.array(rows)).T
        slope = float(np.polyfit(e, m, 1)[0])
    return rows, slope
