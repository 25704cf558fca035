import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from socsense.errors import AllZero, BadAlpha, DimensionMismatch
from socsense.probability import (
    DiscreteRV,
    blackwell_dominates,
    cvar,
    fosd_dominates,
    mlr_dominates,
    normalize,
    shannon_entropy,
)


def random_simplex(rng, n):
    return rng.dirichlet(np.ones(n))


def random_stochastic(rng, rows, cols):
    return rng.dirichlet(np.ones(cols), size=rows)


def cvar_grid_oracle(values, probs, alpha, n=200001):
    # brute force over a dense z grid spanning the support
    z = np.linspace(values.min(), values.max(), n)
    obj = z + (np.maximum(values[None, :] - z[:, None], 0) @ probs) / alpha
    return obj.min()


class TestNormalize:
    @pytest.mark.parametrize("raw, expected", [
        ((2, 2), (0.5, 0.5)),
        ((0, 3), (0, 1)),
        ((0.4, 0.1, 0.5), (0.4, 0.1, 0.5)),
    ])
    def test_examples(self, raw, expected):
        np.testing.assert_allclose(normalize(raw), expected, atol=1e-15)

    def test_all_zero(self):
        with pytest.raises(AllZero):
            normalize([0.0, 0.0])
        with pytest.raises(AllZero):
            normalize([[1.0, 0.0], [0.0, 0.0]])

    @settings(max_examples=200)
    @given(arrays(float, st.integers(2, 8), elements=st.floats(0, 1e6)))
    def test_sums_to_one_and_idempotent(self, v):
        if not np.any(v > 0):
            return
        p = normalize(v)
        assert abs(p.sum() - 1) <= 1e-12
        np.testing.assert_array_equal(normalize(p), p)


class TestOrders:
    def test_fosd_examples(self):
        assert fosd_dominates([0.3, 0.7], [0.3, 0.7])
        assert fosd_dominates([0, 1], [1, 0])
        assert not fosd_dominates([0.5, 0.5], [0.2, 0.8])

    def test_mlr_examples(self):
        assert mlr_dominates([0.4, 0.6], [0.4, 0.6])
        assert mlr_dominates([0.2, 0.8], [0.8, 0.2])
        assert not mlr_dominates([0.8, 0.2], [0.2, 0.8])

    def test_mlr_zero_corners(self):
        assert mlr_dominates([0, 0, 1], [0, 0, 1])
        assert mlr_dominates([0, 1, 0], [1, 0, 0])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            fosd_dominates([0.5, 0.5], [1 / 3] * 3)
        with pytest.raises(DimensionMismatch):
            mlr_dominates([0.5, 0.5], [1 / 3] * 3)

    def test_mlr_implies_fosd_random(self):
        rng = np.random.default_rng(0)
        hits = 0
        for _ in range(5000):
            n = rng.integers(2, 6)
            p, q = random_simplex(rng, n), random_simplex(rng, n)
            if mlr_dominates(p, q):
                hits += 1
                assert fosd_dominates(p, q)
        assert hits > 100

    def test_antisymmetry(self):
        rng = np.random.default_rng(1)
        for _ in range(2000):
            p, q = random_simplex(rng, 3), random_simplex(rng, 3)
            if fosd_dominates(p, q, tol=0) and fosd_dominates(q, p, tol=0):
                np.testing.assert_allclose(p, q, atol=1e-12)
            if mlr_dominates(p, q, tol=0) and mlr_dominates(q, p, tol=0):
                np.testing.assert_allclose(p, q, atol=1e-12)


class TestBlackwell:
    def test_identity_dominates_everything(self):
        rng = np.random.default_rng(2)
        b2 = random_stochastic(rng, 3, 4)
        assert blackwell_dominates(np.eye(3), b2)

    def test_reflexive(self):
        b = np.array([[0.8, 0.2], [0.3, 0.7]])
        assert blackwell_dominates(b, b)

    def test_uniform_does_not_dominate_identity(self):
        # uniform rows times any stochastic Q still have equal rows, so the
        # distance to the identity is at least 1/2 in sup norm
        assert not blackwell_dominates(np.full((2, 2), 0.5), np.eye(2))

    def test_garbling_witness(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            X, Y1, Y2 = rng.integers(2, 4), rng.integers(2, 4), rng.integers(2, 4)
            b = random_stochastic(rng, X, Y1)
            Q = random_stochastic(rng, Y1, Y2)
            assert blackwell_dominates(b, b @ Q)


class TestCvar:
    def test_alpha_one_is_mean(self):
        rv = DiscreteRV([1.0, 4.0, -2.0], [0.2, 0.5, 0.3])
        assert cvar(rv, 1.0) == pytest.approx(rv.mean(), abs=1e-10)

    def test_degenerate(self):
        rv = DiscreteRV([3.5], [1.0])
        for a in (0.01, 0.3, 1.0):
            assert cvar(rv, a) == pytest.approx(3.5)

    def test_tail_below_atom(self):
        values, probs = np.array([0.0, 1.0]), np.array([0.9, 0.1])
        oracle = cvar_grid_oracle(values, probs, 0.05)
        assert oracle == pytest.approx(1.0, abs=1e-9)
        assert cvar(DiscreteRV(values, probs), 0.05) == pytest.approx(oracle, abs=1e-9)

    def test_matches_grid_oracle(self):
        rng = np.random.default_rng(4)
        for _ in range(30):
            n = rng.integers(2, 6)
            values = rng.normal(size=n)
            probs = random_simplex(rng, n)
            alpha = rng.uniform(0.01, 1.0)
            got = cvar(DiscreteRV(values, probs), alpha)
            # grid spacing bounds the oracle's error by spacing * (1 + 1/alpha)
            spacing = np.ptp(values) / 200000
            assert got == pytest.approx(cvar_grid_oracle(values, probs, alpha), abs=spacing * (1 + 1 / alpha) + 1e-12)

    @pytest.mark.parametrize("alpha", [0.0, -0.1, 1.5])
    def test_bad_alpha(self, alpha):
        with pytest.raises(BadAlpha):
            cvar(DiscreteRV([0.0, 1.0], [0.5, 0.5]), alpha)

    def test_monotone_and_above_mean(self):
        rng = np.random.default_rng(5)
        alphas = np.linspace(0.01, 1.0, 40)
        for _ in range(100):
            n = rng.integers(2, 6)
            rv = DiscreteRV(rng.normal(size=n), random_simplex(rng, n))
            vals = np.array([cvar(rv, a) for a in alphas])
            assert np.all(np.diff(vals) <= 1e-12)
            assert np.all(vals >= rv.mean() - 1e-12)
            assert vals[-1] == pytest.approx(rv.mean(), abs=1e-10)


class TestEntropy:
    @pytest.mark.parametrize("p, h", [((1, 0), 0.0), ((0.5, 0.5), 1.0), ((0.25,) * 4, 2.0)])
    def test_examples(self, p, h):
        assert shannon_entropy(p) == pytest.approx(h, abs=1e-15)

    def test_uniform_is_max(self):
        rng = np.random.default_rng(6)
        for n in range(2, 7):
            hmax = shannon_entropy(np.full(n, 1 / n))
            assert hmax == pytest.approx(np.log2(n))
            for _ in range(200):
                assert shannon_entropy(random_simplex(rng, n)) <= hmax + 1e-12
