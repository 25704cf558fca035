"""SIS epidemics on graphs and their degree-based mean-field dynamics.

The state is the infected degree profile ``rho``, with ``rho[d-1]`` the
fraction of degree-``d`` nodes that are infected.  One node updates per step,
so ``N`` steps make one epoch.  Per step the mean field moves by

    rho(d) += [(1 - rho(d)) F(d, theta) - rho(d) delta] / N,
    F(d, theta) = 1 - (1 - beta theta)^d,

where ``theta`` is the infected link probability.  On top of this sit two
approximate filters for the profile (EKF, particle) and the posterior
Cramer-Rao bound recursion.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateWeights, DimensionMismatch, SingularInformation
from .graphs import Graph, configuration_graph

RIDGE = 1e-10


@dataclass(frozen=True)
class SisParams:
    beta: float
    delta: float
    P: np.ndarray  # P[d-1] = Prob(degree d), d = 1..d_max

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        if not 0.0 <= self.beta <= 1.0 or not 0.0 <= self.delta <= 1.0:
            raise ValueError("beta and delta must lie in [0, 1]")
        if P.ndim != 1 or P.size == 0 or np.any(P < 0) or abs(P.sum() - 1.0) > 1e-9:
            raise ValueError("P must be a degree distribution over 1..d_max")
        object.__setattr__(self, "P", P)

    @property
    def d_max(self) -> int:
        return self.P.size

    @property
    def degrees(self) -> np.ndarray:
        return np.arange(1, self.P.size + 1)


def powerlaw_degree_law(gamma: float, d_max: int) -> np.ndarray:
    w = np.arange(1, d_max + 1, dtype=float) ** -gamma
    return w / w.sum()


def exponential_degree_law(lam: float, d_max: int) -> np.ndarray:
    w = np.exp(-lam * np.arange(1, d_max + 1))
    return w / w.sum()


def poisson_degree_law(mean: float, d_max: int) -> np.ndarray:
    """Poisson(mean) conditioned on 1 <= d <= d_max."""
    d = np.arange(1, d_max + 1)
    logw = d * np.log(mean) - np.cumsum(np.log(d))
    w = np.exp(logw - logw.max())
    return w / w.sum()


def infected_link_prob(rho, P) -> np.ndarray | float:
    """Probability that a uniformly chosen link points to an infected node."""
    rho = np.asarray(rho, dtype=float)
    P = np.asarray(P, dtype=float)
    w = np.arange(1, P.size + 1) * P
    return rho @ w / w.sum()


def infection_prob(params: SisParams, theta):
    """F(d, theta) for every degree; broadcasts over a batch of thetas."""
    theta = np.asarray(theta, dtype=float)[..., None]
    return 1.0 - (1.0 - params.beta * theta) ** params.degrees


def drift(rho, params: SisParams) -> np.ndarray:
    """Expected per-step change times N: p01 - p10."""
    rho = np.asarray(rho, dtype=float)
    F = infection_prob(params, infected_link_prob(rho, params.P))
    return (1.0 - rho) * F - rho * params.delta


def mean_field_step(rho, params: SisParams, N: int) -> np.ndarray:
    if N < 1:
        raise ValueError("N must be >= 1")
    rho = np.asarray(rho, dtype=float)
    return np.clip(rho + drift(rho, params) / N, 0.0, 1.0)


def step_jacobian(rho, params: SisParams, N: int) -> np.ndarray:
    """Jacobian of one unclamped mean-field step; batched over leading axes."""
    rho = np.asarray(rho, dtype=float)
    d = params.degrees
    w = d * params.P
    w = w / w.sum()
    theta = rho @ w
    base = 1.0 - params.beta * theta[..., None]
    F = 1.0 - base ** d
    dF = d * params.beta * base ** (d - 1)
    J = ((1.0 - rho) * dF)[..., :, None] * w / N
    diag = 1.0 - (F + params.delta) / N
    idx = np.arange(d.size)
    J[..., idx, idx] += diag
    return J


def epoch_map(rho, params: SisParams, N: int, steps: int | None = None, jacobian: bool = False):
    """Apply ``steps`` (default ``N``) mean-field steps; optionally return the composed Jacobian."""
    steps = N if steps is None else steps
    x = np.array(rho, dtype=float)
    J = np.broadcast_to(np.eye(params.d_max), x.shape + (params.d_max,)).copy() if jacobian else None
    for _ in range(steps):
        if jacobian:
            J = step_jacobian(x, params, N) @ J
        x = mean_field_step(x, params, N)
    return (x, J) if jacobian else x


def mean_field_trace(rho0, params: SisParams, N: int, epochs: int) -> np.ndarray:
    """Profile at every epoch boundary, shape ``(epochs + 1, ..., d_max)``."""
    out = [np.array(rho0, dtype=float)]
    for _ in range(epochs):
        out.append(epoch_map(out[-1], params, N))
    return np.array(out)


# ---------------------------------------------------------------------------
# simulation on a graph


@dataclass
class SisTrace:
    epochs: np.ndarray
    rho: np.ndarray  # (len(epochs), d_max); nan where no node has that degree
    counts: np.ndarray  # nodes per degree 1..d_max

    def degree_law(self) -> np.ndarray:
        return self.counts / self.counts.sum()


def _profile(state, deg, counts, d_max):
    inf = np.bincount(deg[state.astype(bool)], minlength=d_max + 1)[1:]
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(counts > 0, inf / np.maximum(counts, 1), np.nan)


def sis_simulate(g: Graph, params: SisParams, steps: int, seed=None, *, initial=None,
                 record_every: int | None = None) -> SisTrace:
    """Asynchronous SIS on ``g``: one uniformly chosen node updates per step.

    A susceptible node with ``m`` infected neighbors is infected with
    probability ``1 - (1 - beta)^m`` (each infected link transmits
    independently); an infected node recovers with probability ``delta``.
    ``initial`` is a boolean infection vector in node order, a scalar
    infection probability, or a per-degree probability vector.  The profile
    is recorded every ``record_every`` steps (default: one epoch of N steps).
    """
    rng = np.random.default_rng(seed)
    n = len(g)
    if n == 0:
        raise ValueError("graph is empty")
    d_max = params.d_max
    indptr, indices = _adjacency(g)
    deg = np.diff(indptr)
    if deg.max() > d_max:
        raise ValueError(f"graph degree {deg.max()} exceeds d_max = {d_max}")
    counts = np.bincount(deg, minlength=d_max + 1)[1:]
    if initial is None:
        state = np.zeros(n, dtype=np.int8)
    elif np.ndim(initial) == 1 and len(initial) == n and np.asarray(initial).dtype == bool:
        state = np.asarray(initial).astype(np.int8)
    else:
        p = np.asarray(initial, dtype=float)
        p = np.concatenate([[0.0], np.broadcast_to(p, (d_max,))])
        state = (rng.random(n) < p[deg]).astype(np.int8)
    # infected-neighbor counts, updated only when a node flips
    m_inf = np.zeros(n, dtype=np.int64)
    np.add.at(m_inf, indices, np.repeat(state, deg))
    m_inf = m_inf.tolist()
    st = state.tolist()
    nbrs = [indices[indptr[i]:indptr[i + 1]].tolist() for i in range(n)]
    escape = [1.0 - (1.0 - params.beta) ** k for k in range(d_max + 1)]
    delta = params.delta
    every = n if record_every is None else int(record_every)
    recs, rows = [0], [_profile(state, deg, counts, d_max)]
    chunk = 1 << 16
    k = 0
    while k < steps:
        size = min(chunk, steps - k)
        picks = rng.integers(n, size=size).tolist()
        coins = rng.random(size).tolist()
        for i, c in zip(picks, coins):
            k += 1
            if st[i]:
                if c < delta:
                    st[i] = 0
                    for j in nbrs[i]:
                        m_inf[j] -= 1
            elif m_inf[i] and c < escape[m_inf[i]]:
                st[i] = 1
                for j in nbrs[i]:
                    m_inf[j] += 1
            if k % every == 0:
                recs.append(k)
                rows.append(_profile(np.array(st, dtype=np.int8), deg, counts, d_max))
    return SisTrace(np.array(recs), np.array(rows), counts)


def sis_simulate_annealed(counts, params: SisParams, steps: int, seed=None, *, initial=0.5,
                          record_every: int | None = None) -> SisTrace:
    """SIS on the annealed network with ``counts[d-1]`` nodes of degree ``d``.

    Every link of an updating node is re-drawn at each step, so a
    susceptible degree-``d`` node sees ``Binomial(d, theta)`` infected
    neighbors and is infected with probability ``F(d, theta)``.  The profile
    is then a Markov chain on its own, the chain whose drift is the mean
    field.  ``initial`` is a scalar or per-degree infection probability.
    """
    rng = np.random.default_rng(seed)
    counts = np.asarray(counts, dtype=np.int64)
    if counts.size != params.d_max:
        raise DimensionMismatch("counts must have one entry per degree 1..d_max")
    n = int(counts.sum())
    d_max = params.d_max
    p0 = np.broadcast_to(np.asarray(initial, dtype=float), (d_max,))
    inf = rng.binomial(counts, p0).tolist()
    nd = counts.tolist()
    cum = np.cumsum(counts)
    links = float(np.dot(np.arange(1, d_max + 1), counts))
    S = float(np.dot(np.arange(1, d_max + 1), inf))  # infected stubs
    beta, delta = params.beta, params.delta
    every = n if record_every is None else int(record_every)

    def profile():
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(counts > 0, np.array(inf) / np.maximum(counts, 1), np.nan)

    recs, rows = [0], [profile()]
    chunk = 1 << 16
    k = 0
    while k < steps:
        size = min(chunk, steps - k)
        cls = np.searchsorted(cum, rng.integers(n, size=size), side="right").tolist()
        u1 = rng.random(size).tolist()
        u2 = rng.random(size).tolist()
        for c, a, b in zip(cls, u1, u2):
            k += 1
            d = c + 1
            if a * nd[c] < inf[c]:
                if b < delta:
                    inf[c] -= 1
                    S -= d
            elif b < 1.0 - (1.0 - beta * S / links) ** d:
                inf[c] += 1
                S += d
            if k % every == 0:
                recs.append(k)
                rows.append(profile())
    return SisTrace(np.array(recs), np.array(rows), counts)


def _adjacency(g: Graph):
    A = g.csr()
    return A.indptr.astype(np.int64), A.indices.astype(np.int64)


def degree_sequence(P, n: int) -> np.ndarray:
    """Exactly ``n`` degrees whose histogram is ``n P`` rounded by largest remainder."""
    P = np.asarray(P, dtype=float)
    raw = n * P
    c = np.floor(raw).astype(int)
    short = n - c.sum()
    if short > 0:
        c[np.argsort(-(raw - c), kind="stable")[:short]] += 1
    return np.repeat(np.arange(1, P.size + 1), c)


@dataclass
class AzumaTable:
    rows: list  # (N, q90 of sup deviation)
    slope: float | None  # None for one N or a zero quantile
    samples: dict  # N -> array of per-trial sup deviations


def azuma_check(params: SisParams, N_list, trials: int, seed=None, *, epochs: int = 10,
                rho0=0.5, quantile: float = 0.9, network: str = "annealed") -> AzumaTable:
    """Sup-norm gap between simulated SIS and the mean field, per network size.

    Each trial takes ``N`` nodes with degree histogram ``N P``, infects them
    independently with probability ``rho0``, runs ``epochs * N`` steps and
    compares with the mean field started from the realized initial profile.
    ``network="annealed"`` simulates the profile chain itself;
    ``"quenched"`` runs on a fixed configuration graph, whose dynamical
    correlations leave an O(1) gap that does not vanish with ``N``.
    """
    if network not in ("annealed", "quenched"):
        raise ValueError(f"unknown network {network!r}")
    N_list = [int(n) for n in N_list]
    if not N_list or min(N_list) < 2:
        raise ValueError("N values must be >= 2")
    ss = np.random.SeedSequence(seed)
    children = ss.spawn(len(N_list) * trials)
    rows, samples = [], {}
    for a, N in enumerate(N_list):
        traces = []
        for t in range(trials):
            rng = np.random.default_rng(children[a * trials + t])
            degs = degree_sequence(params.P, N)
            if network == "annealed":
                counts = np.bincount(degs, minlength=params.d_max + 1)[1:]
                traces.append(sis_simulate_annealed(counts, params, epochs * N, rng, initial=rho0,
                                                    record_every=N))
            else:
                g = configuration_graph(degs, rng)
                traces.append(sis_simulate(g, params, epochs * N, rng, initial=rho0, record_every=N))
        sup = _sup_gaps(traces, params, N, epochs)
        samples[N] = sup
        rows.append((N, float(np.quantile(sup, quantile))))
    slope = None
    if len(rows) > 1 and all(q > 0 for _, q in rows):
        x, y = np.log(np.array(rows)).T
        slope = float(np.polyfit(x, y, 1)[0])
    return AzumaTable(rows, slope, samples)


def _sup_gaps(traces, params: SisParams, N: int, epochs: int) -> np.ndarray:
    """Per-trace sup-norm gap; traces sharing a degree histogram share one batched mean field."""
    out = np.empty(len(traces))
    groups: dict = {}
    for i, tr in enumerate(traces):
        groups.setdefault(tuple(tr.counts), []).append(i)
    for key, idx in groups.items():
        counts = np.array(key)
        present = counts > 0
        mf_params = SisParams(params.beta, params.delta, counts / counts.sum())
        sims = np.array([traces[i].rho for i in idx])  # (trials, epochs + 1, D)
        start = np.where(present, sims[:, 0], 0.0)
        mf = np.moveaxis(mean_field_trace(start, mf_params, N, epochs), 0, 1)
        k = min(mf.shape[1], sims.shape[1])
        gap = np.abs(mf[:, :k][..., present] - sims[:, :k][..., present])
        out[idx] = gap.max(axis=(1, 2))
    return out


# ---------------------------------------------------------------------------
# filtering


@dataclass(frozen=True)
class NoiseModel:
    """Gaussian noise around the mean field.

    Process variance per epoch is ``[(1-rho) F + rho delta] / (N P(d))``;
    measurement variance with ``m`` sampled nodes is
    ``rho (1-rho) / (m P(d)) + floor``.  ``process`` / ``measurement``, if
    set, replace the state-dependent variances by constants.
    """
    N: int
    m: int
    floor: float = 1e-6
    process_floor: float = 1e-12
    process: np.ndarray | None = None
    measurement: np.ndarray | None = None

    def Q(self, rho, params: SisParams):
        if self.process is not None:
            return np.broadcast_to(np.asarray(self.process, dtype=float), np.shape(rho))
        rho = np.asarray(rho, dtype=float)
        F = infection_prob(params, infected_link_prob(rho, params.P))
        v = ((1.0 - rho) * F + rho * params.delta) / (self.N * params.P)
        return v + self.process_floor

    def R(self, rho, params: SisParams):
        if self.measurement is not None:
            return np.broadcast_to(np.asarray(self.measurement, dtype=float), np.shape(rho))
        rho = np.asarray(rho, dtype=float)
        return rho * (1.0 - rho) / (self.m * params.P) + self.floor


def simulate_observations(params: SisParams, noise: NoiseModel, rho0, epochs: int, seed=None):
    """Hidden profile under the Gaussian noise model and per-epoch sampled fractions.

    Each epoch ``m`` nodes are drawn; the degree-``d`` observation is the
    infected fraction among the sampled degree-``d`` nodes (``nan`` when none
    was drawn).  Returns ``(truth (epochs, D), obs (epochs, D))``.
    """
    rng = np.random.default_rng(seed)
    x = np.array(rho0, dtype=float)
    truth, obs = [], []
    for _ in range(epochs):
        q = noise.Q(x, params)
        x = np.clip(epoch_map(x, params, noise.N) + np.sqrt(q) * rng.standard_normal(x.size), 0.0, 1.0)
        n_d = rng.multinomial(noise.m, params.P)
        inf = rng.binomial(n_d, x)
        with np.errstate(invalid="ignore"):
            y = np.where(n_d > 0, inf / np.maximum(n_d, 1), np.nan)
        truth.append(x.copy())
        obs.append(y)
    return np.array(truth), np.array(obs)


def ekf_track(params: SisParams, noise: NoiseModel, observations, mean0, var0) -> np.ndarray:
    """Extended Kalman filter with the analytic epoch Jacobian; returns per-epoch means."""
    x = np.array(mean0, dtype=float)
    D = params.d_max
    C = np.diag(np.broadcast_to(np.asarray(var0, dtype=float), (D,))).astype(float)
    out = []
    for y in np.asarray(observations, dtype=float):
        q = noise.Q(x, params)
        x, F = epoch_map(x, params, noise.N, jacobian=True)
        C = F @ C @ F.T + np.diag(q)
        seen = ~np.isnan(y)
        if seen.any():
            H = np.eye(D)[seen]
            S = H @ C @ H.T + np.diag(noise.R(x, params)[seen])
            K = np.linalg.solve(S, H @ C).T
            x = np.clip(x + K @ (y[seen] - x[seen]), 0.0, 1.0)
            C = C - K @ H @ C
            C = 0.5 * (C + C.T)
        out.append(x.copy())
    return np.array(out)


def systematic_resample(weights, rng) -> np.ndarray:
    n = len(weights)
    u = (rng.random() + np.arange(n)) / n
    idx = np.searchsorted(np.cumsum(weights), u, side="right")
    return np.minimum(idx, n - 1)


def particle_track(params: SisParams, noise: NoiseModel, observations, mean0, var0, *,
                   particles: int = 2000, seed=None, min_ess: float = 1.0 + 1e-9) -> np.ndarray:
    """Bootstrap particle filter with systematic resampling; returns per-epoch means.

    Raises DegenerateWeights when the effective sample size drops below
    ``min_ess``, i.e. the weights have collapsed onto one particle.
    """
    rng = np.random.default_rng(seed)
    D = params.d_max
    sd0 = np.sqrt(np.broadcast_to(np.asarray(var0, dtype=float), (D,)))
    X = np.clip(np.asarray(mean0, dtype=float) + sd0 * rng.standard_normal((particles, D)), 0.0, 1.0)
    out = []
    for y in np.asarray(observations, dtype=float):
        q = noise.Q(X, params)
        X = np.clip(epoch_map(X, params, noise.N) + np.sqrt(q) * rng.standard_normal(X.shape), 0.0, 1.0)
        seen = ~np.isnan(y)
        if seen.any():
            r = noise.R(X, params)[:, seen]
            logw = -0.5 * np.sum((y[seen] - X[:, seen]) ** 2 / r + np.log(r), axis=1)
            if not np.all(np.isfinite(logw)):
                raise DegenerateWeights("non-finite particle log-weights")
            w = np.exp(logw - logw.max())
            w /= w.sum()
            ess = 1.0 / np.sum(w ** 2)
            if ess < min_ess:
                raise DegenerateWeights(f"effective sample size {ess:.3g} < {min_ess}")
            out.append(w @ X)
            X = X[systematic_resample(w, rng)]
        else:
            out.append(X.mean(axis=0))
    return np.array(out)


def track_profile(params: SisParams, noise: NoiseModel, observations, mean0, var0,
                  filter: str = "ekf", **kw) -> np.ndarray:
    if filter == "ekf":
        return ekf_track(params, noise, observations, mean0, var0)
    if filter == "particle":
        return particle_track(params, noise, observations, mean0, var0, **kw)
    raise ValueError(f"unknown filter {filter!r}")


# ---------------------------------------------------------------------------
# posterior Cramer-Rao bound


def _inv(M):
    try:
        return np.linalg.inv(M), False
    except np.linalg.LinAlgError:
        pass
    return np.linalg.inv(M + RIDGE * np.eye(M.shape[-1])), True


def pcrlb_recursion(params: SisParams, noise: NoiseModel, horizon: int, mc_draws: int = 200,
                    seed=None, *, mean0=None, var0: float = 0.01) -> np.ndarray:
    """Posterior Cramer-Rao bound ``trace(J_k^{-1})`` for k = 0..horizon.

    Gaussian approximation with state-dependent variances: the information
    blocks average ``F' Q^-1 F``, ``Q^-1 F`` and ``Q^-1 + R^-1`` over
    ``mc_draws`` trajectories of the noisy mean field started from the
    prior ``N(mean0, var0 I)``.  Measurements are full-profile (H = I).
    """
    rng = np.random.default_rng(seed)
    D = params.d_max
    mean0 = np.full(D, 0.5) if mean0 is None else np.asarray(mean0, dtype=float)
    X = np.clip(mean0 + np.sqrt(var0) * rng.standard_normal((mc_draws, D)), 0.0, 1.0)
    J = np.eye(D) / var0
    bounds = [D * var0]
    flagged = False
    for _ in range(horizon):
        q = noise.Q(X, params)
        Xn, F = epoch_map(X, params, noise.N, jacobian=True)
        Qi = 1.0 / q  # (draws, D), diagonal
        D11 = np.mean(np.einsum("nki,nk,nkj->nij", F, Qi, F), axis=0)
        D12 = -np.mean(np.transpose(F, (0, 2, 1)) * Qi[:, None, :], axis=0)
        Xn = np.clip(Xn + np.sqrt(q) * rng.standard_normal(X.shape), 0.0, 1.0)
        D22 = np.diag(np.mean(Qi, axis=0) + np.mean(1.0 / noise.R(Xn, params), axis=0))
        A, bad = _inv(J + D11)
        J = D22 - D12.T @ A @ D12
        J = 0.5 * (J + J.T)
        Ji, bad2 = _inv(J)
        if (bad or bad2) and not flagged:
            warnings.warn("information matrix numerically singular; ridge applied", SingularInformation)
            flagged = True
        bounds.append(float(np.trace(Ji)))
        X = Xn
    return np.array(bounds)
