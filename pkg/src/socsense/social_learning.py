"""Sequential Bayesian social learning.

Agents act once each, in order.  Agent ``k`` sees the public belief ``pi``,
a private observation ``y`` and forms the private belief ``eta = T(pi, y)``
with the HMM filter; it then takes the action minimizing its (risk-adjusted)
expected cost.  Everybody else only sees the action, so the public belief is
updated with the social learning filter, whose likelihood depends on ``pi``.

Indices are zero-based throughout: state ``0`` is the first state, action
``0`` the first action.  Ties between actions go to the lowest index.

Most routines have a ``*_batch`` form that evaluates many beliefs at once
(rows of a 2-D array); the scalar functions call the batch forms so both
paths make identical decisions on identical inputs.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import AllZero, DimensionMismatch, ImpossibleAction, UnsupportedDimension
from .probability import (
    _check_alpha,
    as_belief,
    as_stochastic,
    cvar_batch,
    entropy_batch,
    normalize,
)

CASCADE_TOL = 1e-12


@dataclass(frozen=True)
class SocialLearningModel:
    """Transition matrix ``P`` (X x X), observation kernel ``B`` (X x Y) and
    agent costs ``c(x, a)`` (X x A).

    ``cvar_under`` selects the belief under which a risk-averse agent
    evaluates CVaR: ``"private"`` (the posterior after its own observation,
    the default) or ``"public"`` (the predicted public belief, which makes
    actions ignore observations altogether).
    """

    transition: np.ndarray
    obs: np.ndarray
    costs: np.ndarray
    tie_break: str = "lowest"
    cvar_under: str = "private"

    def __post_init__(self):
        P = as_stochastic(self.transition, "transition")
        B = as_stochastic(self.obs, "observation kernel")
        c = np.asarray(self.costs, dtype=float)
        if P.shape[0] != P.shape[1] or P.shape[0] != B.shape[0] or c.ndim != 2 or c.shape[0] != P.shape[0]:
            raise DimensionMismatch("inconsistent model dimensions")
        if P.shape[0] < 2:
            raise DimensionMismatch("need at least two states")
        if not np.all(np.isfinite(c)):
            raise ValueError("costs must be finite")
        if self.tie_break != "lowest":
            raise ValueError("only lowest-index tie breaking is supported")
        if self.cvar_under not in ("private", "public"):
            raise ValueError("cvar_under must be 'private' or 'public'")
        for name, val in (("transition", P), ("obs", B), ("costs", c)):
            val = val.copy()
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def X(self) -> int:
        return self.transition.shape[0]

    @property
    def Y(self) -> int:
        return self.obs.shape[1]

    @property
    def A(self) -> int:
        return self.costs.shape[1]

    def replace(self, **changes) -> "SocialLearningModel":
        kw = dict(transition=self.transition, obs=self.obs, costs=self.costs,
                  tie_break=self.tie_break, cvar_under=self.cvar_under)
        kw.update(changes)
        return SocialLearningModel(**kw)


def canonical_model() -> SocialLearningModel:
    """Two states, identity dynamics, 0.8-accurate symmetric observations, 0/1 costs."""
    return SocialLearningModel(
        transition=np.eye(2),
        obs=np.array([[0.8, 0.2], [0.2, 0.8]]),
        costs=np.array([[0.0, 1.0], [1.0, 0.0]]),
    )


CANONICAL_PRIOR = np.array([0.5, 0.5])


# ---------------------------------------------------------------------------
# batch kernels


def predict_batch(m: SocialLearningModel, pis) -> np.ndarray:
    """One-step prediction ``P' pi`` for each row of ``pis``."""
    return np.asarray(pis, dtype=float) @ m.transition


def _joint(kernel, pred):
    # joint[..., y, j] = B(j, y) * pred(j)
    return pred[..., None, :] * kernel.T


def hmm_posteriors_batch(m: SocialLearningModel, pis, kernel=None):
    """HMM filter output for every observation.

    Returns ``(posteriors, py)`` with shapes ``(..., Y, X)`` and ``(..., Y)``;
    posteriors for observations of zero probability are filled with NaN.
    """
    B = m.obs if kernel is None else np.asarray(kernel, dtype=float)
    pred = predict_batch(m, pis)
    joint = _joint(B, pred)
    py = joint.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        post = joint / py[..., None]
    post = post / post.sum(axis=-1, keepdims=True)
    post[py <= 0] = np.nan
    return post, py


def risk_costs_batch(costs, etas, alpha: float = 1.0) -> np.ndarray:
    """Per-action risk-adjusted cost of each belief row; shape ``(..., A)``.

    ``alpha = 1`` is the plain expectation ``eta' c_a``; smaller ``alpha``
    applies CVaR at that level to the cost column of each action.
    """
    alpha = _check_alpha(alpha)
    etas = np.asarray(etas, dtype=float)
    costs = np.asarray(costs, dtype=float)
    if alpha == 1.0:
        return etas @ costs
    return np.stack([cvar_batch(costs[:, a], etas, alpha) for a in range(costs.shape[1])], axis=-1)


def actions_batch(costs, etas, alpha: float = 1.0) -> np.ndarray:
    """Lowest-index argmin of the risk-adjusted costs."""
    return np.argmin(risk_costs_batch(costs, etas, alpha), axis=-1)


def action_table_batch(m: SocialLearningModel, pis, alpha: float = 1.0):
    """Action each observation would trigger at each public belief.

    Returns ``(actions, py)`` with shapes ``(..., Y)``; entries with
    ``py == 0`` are set to ``-1``.
    """
    pis = np.asarray(pis, dtype=float)
    post, py = hmm_posteriors_batch(m, pis)
    if m.cvar_under == "public" and alpha != 1.0:
        pred = predict_batch(m, pis)
        acts = np.broadcast_to(actions_batch(m.costs, pred, alpha)[..., None], py.shape).copy()
    else:
        safe = np.where(np.isnan(post), 1.0 / m.X, post)
        acts = actions_batch(m.costs, safe, alpha)
    acts[py <= 0] = -1
    return acts, py


def social_update_batch(m: SocialLearningModel, pis, alpha: float = 1.0):
    """Social learning filter for every action at every public belief.

    Returns ``(posteriors, sigma)`` with shapes ``(..., A, X)`` and
    ``(..., A)``; ``sigma[..., a]`` is the probability of action ``a`` and
    posteriors of impossible actions are NaN.
    """
    pis = np.asarray(pis, dtype=float)
    pred = predict_batch(m, pis)
    acts, _ = action_table_batch(m, pis, alpha)
    # likelihood[..., a, j] = sum_y 1{act(y) = a} B(j, y)
    onehot = (acts[..., :, None] == np.arange(m.A)).astype(float)  # (..., Y, A)
    like = np.einsum("...ya,jy->...aj", onehot, m.obs)
    joint = like * pred[..., None, :]
    sigma = joint.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        post = joint / sigma[..., None]
    post = post / post.sum(axis=-1, keepdims=True)
    post[sigma <= 0] = np.nan
    return post, sigma


def herding_mask_batch(m: SocialLearningModel, pis, alpha: float = 1.0) -> np.ndarray:
    """True where every observation of positive probability triggers one action."""
    acts, py = action_table_batch(m, pis, alpha)
    live = py > 0
    big = np.where(live, acts, np.iinfo(np.int64).max)
    small = np.where(live, acts, -1)
    return big.min(axis=-1) == small.max(axis=-1)


# ---------------------------------------------------------------------------
# scalar operations


def hmm_filter_step(m: SocialLearningModel, prior, y: int) -> np.ndarray:
    """Posterior ``T(prior, y)`` of the classical HMM filter."""
    prior = as_belief(prior, dim=m.X)
    if not 0 <= y < m.Y:
        raise IndexError(f"observation {y} out of range")
    pred = predict_batch(m, prior)
    return normalize(m.obs[:, y] * pred)


def sl_action(m: SocialLearningModel, eta) -> int:
    """Myopic action ``argmin_a c_a' eta``."""
    eta = as_belief(eta, dim=m.X)
    return int(actions_batch(m.costs, eta, 1.0))


def cvar_action(m: SocialLearningModel, eta, alpha: float) -> int:
    """Action minimizing ``CVaR_alpha`` of the cost column under ``eta``."""
    eta = as_belief(eta, dim=m.X)
    return int(actions_batch(m.costs, eta, alpha))


def sl_public_update(m: SocialLearningModel, pi, a: int, alpha: float = 1.0):
    """Public belief after observing action ``a``; returns ``(posterior, sigma)``.

    Raises
    ------
    ImpossibleAction
        If ``a`` has zero probability at ``pi``.
    """
    pi = as_belief(pi, dim=m.X)
    if not 0 <= a < m.A:
        raise IndexError(f"action {a} out of range")
    post, sigma = social_update_batch(m, pi, alpha)
    if not sigma[a] > 0:
        raise ImpossibleAction(f"action {a} has zero probability at {pi}")
    return post[a], float(sigma[a])


def herding_region(m: SocialLearningModel, alpha: float = 1.0, grid: int = 1001) -> np.ndarray:
    """Grid values of ``pi(1)`` (first-state probability) at which agents herd.

    Only two-state models are supported; the grid is uniform on ``[0, 1]``.
    """
    if m.X != 2:
        raise UnsupportedDimension("herding regions are computed for two-state models only")
    if grid < 3:
        raise ValueError("grid must have at least 3 points")
    g = np.linspace(0.0, 1.0, grid)
    pis = np.column_stack([g, 1.0 - g])
    return g[herding_mask_batch(m, pis, alpha)]


@dataclass
class SocialLearningPath:
    state: int
    observations: np.ndarray
    actions: np.ndarray
    publics: np.ndarray  # (horizon + 1, X); row 0 is the prior


def simulate_social_learning(m: SocialLearningModel, prior, horizon: int, rng,
                             alpha: float = 1.0, stop_when_herding: bool = True) -> SocialLearningPath:
    """Run the sequential protocol with a fixed true state drawn from ``prior``.

    Requires identity dynamics.  Once the public belief enters the herding
    region it is a fixed point of the filter; with ``stop_when_herding`` the
    remaining rows are filled without further simulation (actions become the
    herd action, observations -1).
    """
    if not np.array_equal(m.transition, np.eye(m.X)):
        raise ValueError("the sequential protocol simulation assumes identity dynamics")
    prior = as_belief(prior, dim=m.X)
    rng = np.random.default_rng(rng)
    x = int(rng.choice(m.X, p=prior))
    publics = np.empty((horizon + 1, m.X))
    publics[0] = prior
    ys = np.full(horizon, -1)
    acts = np.full(horizon, -1)
    pi = prior
    cum_obs = np.cumsum(m.obs[x])
    for k in range(horizon):
        table, py = action_table_batch(m, pi, alpha)
        live = table[py > 0]
        if stop_when_herding and np.all(live == live[0]):
            publics[k + 1:] = pi
            acts[k:] = live[0]
            break
        y = int(np.searchsorted(cum_obs, rng.random(), side="right"))
        y = min(y, m.Y - 1)
        a = int(table[y])
        post, sigma = social_update_batch(m, pi, alpha)
        pi = post[a]
        ys[k] = y
        acts[k] = a
        publics[k + 1] = pi
    return SocialLearningPath(x, ys, acts, publics)


def cascade_time(publics, tol: float = CASCADE_TOL):
    """First index after which the public belief never moves by more than ``tol``."""
    publics = np.asarray(publics)
    steps = np.abs(np.diff(publics, axis=0)).max(axis=1)
    moving = np.flatnonzero(steps > tol)
    k = 0 if moving.size == 0 else int(moving[-1]) + 1
    if k >= len(publics) - 1:
        return None
    return k


def detect_cascade(m: SocialLearningModel, prior, horizon: int, seed, alpha: float = 1.0):
    """Time at which an information cascade starts, or ``None`` within ``horizon``."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    path = simulate_social_learning(m, prior, horizon, seed, alpha)
    return cascade_time(path.publics)


# ---------------------------------------------------------------------------
# rational inattention


@dataclass(frozen=True)
class AttentionModel:
    """Observation kernels indexed by attention level, plus information-cost weight."""

    kernels: tuple
    lam: float = 0.0

    def __post_init__(self):
        if len(self.kernels) == 0:
            raise ValueError("need at least one attention level")
        ks = tuple(as_stochastic(k, "attention kernel") for k in self.kernels)
        if len({k.shape[0] for k in ks}) != 1:
            raise DimensionMismatch("kernels must share the state dimension")
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        object.__setattr__(self, "kernels", ks)


def ri_costs(am: AttentionModel, m: SocialLearningModel, pi):
    """Expected myopic cost and mutual information for every attention level.

    Returns ``(expected_cost, information)`` arrays indexed by attention level.
    Information is measured against the predicted belief ``P' pi``, which
    keeps it nonnegative for any dynamics.
    """
    pi = as_belief(pi, dim=m.X)
    pred = predict_batch(m, pi)
    h_prior = entropy_batch(pred)
    costs, info = [], []
    for B in am.kernels:
        if B.shape[0] != m.X:
            raise DimensionMismatch("kernel state dimension differs from the model")
        post, py = hmm_posteriors_batch(m, pi, kernel=B)
        live = py > 0
        best = (post[live] @ m.costs).min(axis=1)
        costs.append(float(py[live] @ best))
        info.append(float(h_prior - py[live] @ entropy_batch(post[live])))
    return np.array(costs), np.array(info)


def ri_choose(am: AttentionModel, m: SocialLearningModel, pi):
    """Attention level minimizing expected cost plus ``lam`` times mutual information."""
    cost, info = ri_costs(am, m, pi)
    total = cost + am.lam * info
    u = int(np.argmin(total))
    return u, float(total[u])


# ---------------------------------------------------------------------------
# anticipatory two-stage equilibrium


@dataclass(frozen=True)
class AnticipatoryModel:
    """Two-stage anticipatory decision problem.

    ``transition[s1, a1, s2]`` is ``p(s2 | s1, a1)``; ``r2[s2, a2]`` is the
    stage-2 reward; ``r1(s1, a1, q)`` is the stage-1 reward, where ``q`` is
    the predicted distribution of the stage-2 action.
    """

    transition: np.ndarray
    r2: np.ndarray
    r1: Callable[[int, int, np.ndarray], float]

    def __post_init__(self):
        T = np.asarray(self.transition, dtype=float)
        r2 = np.asarray(self.r2, dtype=float)
        if T.ndim != 3 or T.shape[0] != T.shape[2] or r2.shape[0] != T.shape[0]:
            raise DimensionMismatch("transition must be (S, A1, S) and r2 (S, A2)")
        if np.any(T < 0) or np.any(np.abs(T.sum(axis=2) - 1) > 1e-9):
            raise ValueError("transition rows must be probability vectors")
        if not np.all(np.isfinite(r2)):
            raise ValueError("r2 must be finite")
        object.__setattr__(self, "transition", T)
        object.__setattr__(self, "r2", r2)

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions1(self) -> int:
        return self.transition.shape[1]

    @property
    def n_actions2(self) -> int:
        return self.r2.shape[1]


def entropy_anxiety_reward(base, kappa: float = 1.0):
    """Stage-1 reward ``base[s1, a1] - kappa * H(q)``: uncertainty about one's
    own future action is unpleasant."""
    base = np.asarray(base, dtype=float)

    def r1(s1, a1, q):
        return float(base[s1, a1] - kappa * entropy_batch(q))

    return r1


def predicted_stage2_actions(am: AnticipatoryModel, mu2) -> np.ndarray:
    """``q[s1, a1, a2]``: law of the stage-2 action induced by ``mu2``."""
    mu2 = np.asarray(mu2, dtype=int)
    onehot = np.zeros((am.n_states, am.n_actions2))
    onehot[np.arange(am.n_states), mu2] = 1.0
    return am.transition @ onehot


def stage1_objective(am: AnticipatoryModel, mu2) -> np.ndarray:
    """``J[s1, a1] = r1(s1, a1, q) + E[r2(s2, mu2(s2))]`` for a fixed stage-2 plan."""
    mu2 = np.asarray(mu2, dtype=int)
    q = predicted_stage2_actions(am, mu2)
    cont = am.transition @ am.r2[np.arange(am.n_states), mu2]
    J = np.empty((am.n_states, am.n_actions1))
    for s1 in range(am.n_states):
        for a1 in range(am.n_actions1):
            J[s1, a1] = am.r1(s1, a1, q[s1, a1]) + cont[s1, a1]
    return J


def anticipatory_equilibrium(am: AnticipatoryModel):
    """Subgame-perfect strategies by the extended Bellman equation.

    Returns ``(mu1, mu2, value)`` where ``value[s1]`` is the stage-1 objective
    at the equilibrium action.
    """
    mu2 = np.argmax(am.r2, axis=1)
    J = stage1_objective(am, mu2)
    mu1 = np.argmax(J, axis=1)
    return mu1, mu2, J[np.arange(am.n_states), mu1]


def subgame_perfect_profiles(am: AnticipatoryModel):
    """All pure profiles ``(mu1, mu2)`` with no profitable one-stage deviation.

    Exhaustive; intended for small models and for checking the solver.
    """
    S = am.n_states
    out = []
    for mu2 in itertools.product(range(am.n_actions2), repeat=S):
        mu2 = np.array(mu2)
        best2 = am.r2.max(axis=1)
        if np.any(am.r2[np.arange(S), mu2] < best2):
            continue
        J = stage1_objective(am, mu2)
        for mu1 in itertools.product(range(am.n_actions1), repeat=S):
            mu1 = np.array(mu1)
            if np.all(J[np.arange(S), mu1] >= J.max(axis=1)):
                out.append((mu1, mu2))
    return out
