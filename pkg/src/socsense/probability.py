"""Probability-vector arithmetic, discrete risk measures and stochastic orders.

Beliefs are plain 1-D numpy arrays that sum to one; stochastic matrices and
observation kernels are 2-D arrays whose rows are beliefs.  Helpers in this
module validate and normalize them but never wrap them in custom classes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import AllZero, BadAlpha, DimensionMismatch

BELIEF_TOL = 1e-12


def normalize(raw) -> np.ndarray:
    """Scale a nonnegative vector (or each row of a matrix) to sum to one.

    Raises
    ------
    AllZero
        If every entry (of some row) is <= 0.
    """
    v = np.asarray(raw, dtype=float)
    if v.ndim == 1:
        total = v.sum()
        if not total > 0 or not np.any(v > 0):
            raise AllZero("vector has no positive mass")
        if abs(total - 1.0) <= BELIEF_TOL and np.all(v >= 0):
            return v.copy()  # already normalized; keeps normalize idempotent
        return v / total
    totals = v.sum(axis=-1, keepdims=True)
    if np.any(~(totals > 0)):
        raise AllZero("some row has no positive mass")
    return v / totals


def as_belief(p, dim: int | None = None) -> np.ndarray:
    """Validate ``p`` as a probability vector and return it as a float array."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size < 2:
        raise DimensionMismatch(f"belief must be a vector of length >= 2, got shape {p.shape}")
    if dim is not None and p.size != dim:
        raise DimensionMismatch(f"expected belief of length {dim}, got {p.size}")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError(f"not a probability vector: {p}")
    return p


def as_stochastic(m, name: str = "matrix") -> np.ndarray:
    """Validate a row-stochastic matrix (transition matrix or observation kernel)."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D")
    if np.any(m < 0) or np.any(np.abs(m.sum(axis=1) - 1.0) > 1e-9):
        raise ValueError(f"{name} rows must be probability vectors")
    return m


def generator_transition(Q, rho: float) -> np.ndarray:
    """Slow-chain transition matrix ``I + rho * Q`` for a generator ``Q``."""
    Q = np.asarray(Q, dtype=float)
    A = np.eye(Q.shape[0]) + rho * Q
    return as_stochastic(A, "I + rho Q")


def _check_same(p, q):
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise DimensionMismatch(f"shapes differ: {p.shape} vs {q.shape}")
    return p, q


def fosd_dominates(p, q, tol: float = BELIEF_TOL) -> bool:
    """True iff ``p`` first-order stochastically dominates ``q``.

    Both vectors are laws over the same ascending support; dominance means
    the CDF of ``p`` lies pointwise below the CDF of ``q``.
    """
    p, q = _check_same(p, q)
    return bool(np.all(np.cumsum(p) <= np.cumsum(q) + tol))


def mlr_dominates(p, q, tol: float = BELIEF_TOL) -> bool:
    """Monotone likelihood ratio order: ``p(i) q(j) >= p(j) q(i)`` for all ``i > j``."""
    p, q = _check_same(p, q)
    cross = np.outer(p, q)  # cross[i, j] = p(i) q(j)
    diff = cross - cross.T  # p(i)q(j) - p(j)q(i)
    lower = np.tril_indices(p.size, k=-1)
    return bool(np.all(diff[lower] >= -tol))


def blackwell_gap(b1, b2) -> float:
    """Smallest ``max|b2 - b1 @ Q|`` over row-stochastic ``Q`` (a linear program)."""
    b1 = np.asarray(b1, dtype=float)
    b2 = np.asarray(b2, dtype=float)
    if b1.ndim != 2 or b2.ndim != 2 or b1.shape[0] != b2.shape[0]:
        raise DimensionMismatch("kernels must share the state dimension")
    X, Y1 = b1.shape
    Y2 = b2.shape[1]
    nq = Y1 * Y2
    # variables: vec(Q) row-major, then t
    c = np.zeros(nq + 1)
    c[-1] = 1.0
    # (b1 Q)[x, j] = sum_i b1[x, i] Q[i, j]
    M = np.zeros((X * Y2, nq))
    for x in range(X):
        for j in range(Y2):
            M[x * Y2 + j, j::Y2] = b1[x]
    target = b2.reshape(-1)
    ones = np.ones((X * Y2, 1))
    A_ub = np.vstack([np.hstack([M, -ones]), np.hstack([-M, -ones])])
    b_ub = np.concatenate([target, -target])
    A_eq = np.zeros((Y1, nq + 1))
    for i in range(Y1):
        A_eq[i, i * Y2:(i + 1) * Y2] = 1.0
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=np.ones(Y1),
                  bounds=[(0, None)] * (nq + 1), method="highs")
    if res.status != 0:
        return float("inf")
    return float(res.x[-1])


def blackwell_dominates(b1, b2, tol: float = 1e-8) -> bool:
    """True iff some stochastic kernel ``Q`` makes ``b2`` equal ``b1 @ Q`` within ``tol``."""
    return blackwell_gap(b1, b2) <= tol


@dataclass(frozen=True)
class DiscreteRV:
    """Finitely supported random cost: ``values[i]`` occurs with ``probs[i]``."""

    values: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        values = np.atleast_1d(np.asarray(self.values, dtype=float))
        probs = np.atleast_1d(np.asarray(self.probs, dtype=float))
        if probs.shape != values.shape:
            raise DimensionMismatch("values and probs differ in length")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
            raise ValueError("probs must be a probability vector")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "probs", probs)

    def mean(self) -> float:
        return float(self.values @ self.probs)


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha <= 1.0:
        raise BadAlpha(f"alpha must lie in (0, 1], got {alpha}")
    return alpha


def cvar_batch(values, probs, alpha: float) -> np.ndarray:
    """CVaR of many discrete laws sharing one support.

    ``values`` has shape ``(n,)``; ``probs`` has shape ``(..., n)``.  The
    Rockafellar-Uryasev minimum over ``z`` is attained at a support point, so
    only those candidates are evaluated.
    """
    alpha = _check_alpha(alpha)
    values = np.asarray(values, dtype=float)
    probs = np.asarray(probs, dtype=float)
    if alpha == 1.0:
        return probs @ values
    excess = np.maximum(values[None, :] - values[:, None], 0.0)  # [z, i]
    objective = values + (probs @ excess.T) / alpha  # (..., z)
    return objective.min(axis=-1)


def cvar(rv: DiscreteRV, alpha: float) -> float:
    """Conditional value-at-risk ``min_z z + E[(X - z)^+] / alpha`` of a discrete cost."""
    return float(cvar_batch(rv.values, rv.probs, alpha))


def shannon_entropy(p) -> float:
    """Entropy in bits, with ``0 log 0 = 0``."""
    return float(entropy_batch(p))


def entropy_batch(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, -p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return terms.sum(axis=-1)
