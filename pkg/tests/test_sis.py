import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from socsense.errors import DegenerateWeights, SingularInformation
from socsense.graphs import complete_graph, cycle_graph, empty_graph
from socsense.sis import (
    NoiseModel,
    SisParams,
    azuma_check,
    degree_sequence,
    drift,
    epoch_map,
    exponential_degree_law,
    infected_link_prob,
    mean_field_step,
    mean_field_trace,
    pcrlb_recursion,
    poisson_degree_law,
    powerlaw_degree_law,
    simulate_observations,
    sis_simulate,
    sis_simulate_annealed,
    step_jacobian,
    track_profile,
)

TWO = SisParams(0.4, 0.2, np.array([0.5, 0.5]))
ER = SisParams(0.3, 0.3, poisson_degree_law(3.0, 6))
# seeded run: complete graph on 20 nodes, beta = 1, delta = 0, one seed node
COMPLETE_HIT_STEP = 83

profiles = st.integers(2, 8).flatmap(
    lambda D: st.tuples(
        st.lists(st.floats(0, 1), min_size=D, max_size=D),
        st.lists(st.floats(0.01, 1), min_size=D, max_size=D),
        st.floats(0, 1),
        st.floats(0, 1),
    )
)


def params_from(P, beta, delta):
    P = np.asarray(P)
    return SisParams(beta, delta, P / P.sum())


class TestLinkProb:
    def test_extremes(self):
        P = powerlaw_degree_law(2.5, 7)
        assert infected_link_prob(np.zeros(7), P) == 0
        assert infected_link_prob(np.ones(7), P) == pytest.approx(1, abs=1e-15)

    def test_two_degree(self):
        assert infected_link_prob([0, 1], [0.5, 0.5]) == pytest.approx(2 / 3, abs=1e-15)

    @given(profiles, st.integers(0, 7), st.floats(0, 1))
    def test_monotone(self, data, i, bump):
        rho, P, _, _ = data
        rho, P = np.array(rho), np.array(P) / np.sum(P)
        hi = rho.copy()
        hi[i % rho.size] = max(hi[i % rho.size], bump)
        assert infected_link_prob(hi, P) >= infected_link_prob(rho, P) - 1e-15


class TestMeanField:
    def test_healthy_absorbing(self):
        np.testing.assert_array_equal(mean_field_step(np.zeros(6), ER, 50), 0)

    def test_arithmetic_oracle(self):
        # theta = (0.05 + 0.2) / 1.5; F = (beta theta, 1 - (1 - beta theta)^2)
        theta = 0.25 / 1.5
        F = np.array([0.4 * theta, 1 - (1 - 0.4 * theta) ** 2])
        rho = np.array([0.1, 0.2])
        want = rho + ((1 - rho) * F - 0.2 * rho) / 100
        np.testing.assert_allclose(mean_field_step(rho, TWO, 100), want, rtol=1e-14)
        np.testing.assert_allclose(want, [0.1004, 0.200631111111111], rtol=1e-12)

    def test_growth_without_recovery(self):
        p = SisParams(0.4, 0.0, ER.P)
        rho = np.array([0.0, 0.1, 0.0, 0.3, 0.0, 0.0])
        assert np.all(mean_field_step(rho, p, 10) >= rho)

    @settings(max_examples=200)
    @given(profiles, st.integers(1, 1000))
    def test_unclamped_stays_in_cube(self, data, N):
        rho, P, beta, delta = data
        p = params_from(P, beta, delta)
        rho = np.array(rho)
        raw = rho + drift(rho, p) / N
        assert np.all(raw >= -1e-12) and np.all(raw <= 1 + 1e-12)

    def test_trace_shape_and_batch(self):
        starts = np.array([[0.1] * 6, [0.5] * 6])
        tr = mean_field_trace(starts, ER, 50, 4)
        assert tr.shape == (5, 2, 6)
        np.testing.assert_allclose(tr[:, 1], mean_field_trace(starts[1], ER, 50, 4), rtol=1e-14)

    def test_jacobian_finite_differences(self):
        rng = np.random.default_rng(0)
        worst = 0.0
        for _ in range(100):
            D = int(rng.integers(2, 8))
            p = SisParams(rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95), rng.dirichlet(np.ones(D)))
            x = rng.uniform(0.05, 0.95, D)
            N = int(rng.integers(1, 200))
            J = step_jacobian(x, p, N)
            h = 1e-6
            fd = np.empty((D, D))
            for j in range(D):
                e = np.zeros(D)
                e[j] = h
                fd[:, j] = (mean_field_step(x + e, p, N) - mean_field_step(x - e, p, N)) / (2 * h)
            worst = max(worst, np.max(np.abs(J - fd)) / np.max(np.abs(fd)))
        assert worst < 1e-6

    def test_epoch_jacobian_composition(self):
        x = np.linspace(0.2, 0.7, 6)
        _, J = epoch_map(x, ER, 40, jacobian=True)
        h = 1e-6
        fd = np.column_stack([(epoch_map(x + h * e, ER, 40) - epoch_map(x - h * e, ER, 40)) / (2 * h)
                              for e in np.eye(6)])
        assert np.max(np.abs(J - fd)) / np.max(np.abs(fd)) < 1e-6


class TestSimulation:
    def test_empty_infection_stays_empty(self):
        tr = sis_simulate(cycle_graph(30), SisParams(0.9, 0.1, [0, 1.0]), 300, seed=0)
        np.testing.assert_array_equal(tr.rho[:, 1], 0)
        assert np.all(np.isnan(tr.rho[:, 0]))

    def test_complete_graph_hitting_step(self):
        P = np.zeros(19)
        P[-1] = 1
        init = np.zeros(20, bool)
        init[0] = True
        tr = sis_simulate(complete_graph(20), SisParams(1.0, 0.0, P), 400, seed=11, initial=init,
                          record_every=1)
        full = np.flatnonzero(tr.rho[:, -1] == 1)
        assert tr.epochs[full[0]] == COMPLETE_HIT_STEP
        assert np.all(tr.rho[full[0]:, -1] == 1)

    def test_recovery_time_geometric(self):
        n, delta = 2000, 0.2
        g = cycle_graph(n)
        tr = sis_simulate(g, SisParams(0.0, delta, [0, 1.0]), 120_000, seed=1, initial=1.0,
                          record_every=1)
        assert tr.rho[-1, 1] == 0
        mean_time = tr.rho[:, 1].sum()  # infected node-steps per node
        assert mean_time == pytest.approx(n / delta, rel=0.05)

    def test_degree_bound(self):
        with pytest.raises(ValueError):
            sis_simulate(complete_graph(5), SisParams(0.5, 0.5, [0.5, 0.5]), 10, seed=0)

    def test_isolated_nodes_ignored(self):
        g = empty_graph(10)
        g.add_edge(0, 1)
        tr = sis_simulate(g, SisParams(0.5, 0.5, [1.0]), 50, seed=2, initial=1.0)
        assert tr.counts.tolist() == [2]

    def test_annealed_tracks_mean_field(self):
        N = 20_000
        counts = np.bincount(degree_sequence(ER.P, N), minlength=7)[1:]
        tr = sis_simulate_annealed(counts, ER, 5 * N, seed=3, initial=0.4)
        mf = mean_field_trace(tr.rho[0], SisParams(ER.beta, ER.delta, counts / N), N, 5)
        assert np.max(np.abs(mf - tr.rho)) < 0.05

    def test_degree_sequence_exact(self):
        d = degree_sequence(ER.P, 1001)
        assert d.size == 1001 and d.min() >= 1 and d.max() <= 6


class TestAzuma:
    def test_single_entry(self):
        tab = azuma_check(ER, [200], 3, seed=0, epochs=2)
        assert len(tab.rows) == 1 and tab.slope is None

    def test_no_infection_no_gap(self):
        tab = azuma_check(SisParams(0.0, 1.0, ER.P), [100, 1000], 3, seed=0, epochs=3, rho0=0.0)
        assert all(q == 0 for _, q in tab.rows)
        assert tab.slope is None

    def test_gap_shrinks(self):
        tab = azuma_check(ER, [100, 1000, 10_000], 20, seed=5, epochs=5)
        assert tab.slope <= -0.3

    def test_quenched_runs(self):
        tab = azuma_check(ER, [100, 400], 3, seed=0, epochs=2, network="quenched")
        assert len(tab.samples[400]) == 3


FILTER_NOISE = NoiseModel(N=200, m=500)


class TestFilters:
    def test_noiseless_limit(self):
        D = ER.d_max
        nm = NoiseModel(N=100, m=1, floor=0.0, process=np.zeros(D), measurement=np.full(D, 1e-14))
        x0 = np.linspace(0.1, 0.6, D)
        trace = mean_field_trace(x0, ER, 100, 8)[1:]
        for f, kw in (("ekf", {}), ("particle", {"particles": 50, "seed": 0})):
            est = track_profile(ER, nm, trace, x0, 0.0, filter=f, **kw)
            np.testing.assert_allclose(est, trace, atol=1e-6)

    def test_ekf_close_to_particle_oracle(self):
        ekf, pf = [], []
        for seed in range(3):
            truth, obs = simulate_observations(ER, FILTER_NOISE, np.full(6, 0.3), 20, seed=seed)
            ekf.append(np.sqrt(np.mean((track_profile(ER, FILTER_NOISE, obs, np.full(6, 0.3), 0.01) - truth) ** 2)))
            est = track_profile(ER, FILTER_NOISE, obs, np.full(6, 0.3), 0.01, filter="particle", seed=seed)
            pf.append(np.sqrt(np.mean((est - truth) ** 2)))
        assert np.mean(ekf) / np.mean(pf) <= 1.5

    def test_healthy_observations(self):
        obs = np.zeros((40, 6))
        for f, kw in (("ekf", {}), ("particle", {"seed": 1, "particles": 500})):
            est = track_profile(ER, FILTER_NOISE, obs, np.full(6, 0.2), 0.01, filter=f, **kw)
            assert np.all(est[-1] < 0.01)

    def test_missing_observations(self):
        obs = np.full((3, 6), np.nan)
        est = track_profile(ER, FILTER_NOISE, obs, np.full(6, 0.3), 0.01)
        np.testing.assert_allclose(est[-1], epoch_map(epoch_map(epoch_map(np.full(6, 0.3), ER, 200), ER, 200), ER, 200))

    def test_degenerate_weights(self):
        D = ER.d_max
        nm = NoiseModel(N=50, m=1, process=np.full(D, 1e-8), measurement=np.full(D, 1e-10))
        with pytest.raises(DegenerateWeights):
            track_profile(ER, nm, np.ones((2, D)), np.full(D, 0.1), 0.01, filter="particle", seed=0)

    def test_unknown_filter(self):
        with pytest.raises(ValueError):
            track_profile(ER, FILTER_NOISE, np.zeros((1, 6)), np.zeros(6), 0.01, filter="ukf")


class TestPcrlb:
    def test_prior_only_bound(self):
        b = pcrlb_recursion(ER, FILTER_NOISE, 0, mc_draws=5, seed=0, var0=0.02)
        assert b.tolist() == [pytest.approx(6 * 0.02, rel=1e-15)]

    def test_linear_case_matches_information_filter(self):
        # beta = delta = 0 freezes the dynamics: F = I, so J' = (J^-1 + q)^-1 + 1/r per coordinate
        D, q, r, var0 = 4, 0.003, 0.01, 0.05
        p = SisParams(0.0, 0.0, np.full(D, 0.25))
        nm = NoiseModel(N=7, m=1, process=np.full(D, q), measurement=np.full(D, r))
        b = pcrlb_recursion(p, nm, 15, mc_draws=7, seed=0, var0=var0)
        j, want = 1 / var0, [D * var0]
        for _ in range(15):
            j = 1 / (1 / j + q) + 1 / r
            want.append(D / j)
        np.testing.assert_allclose(b, want, rtol=1e-10)

    @pytest.mark.parametrize("P", [powerlaw_degree_law(2.7, 5), exponential_degree_law(2.7, 5), ER.P],
                             ids=["powerlaw", "exponential", "poisson"])
    def test_nonincreasing_stationary_measurements(self, P):
        nm = NoiseModel(N=200, m=500, process=np.full(P.size, 1e-3), measurement=np.full(P.size, 2e-4))
        for beta, delta in ((0.0, 0.3), (0.5, 0.2), (0.3, 0.3)):
            b = pcrlb_recursion(SisParams(beta, delta, P), nm, 20, mc_draws=100, seed=0, var0=0.01)
            tol = 0.0 if beta == 0 else 1e-3
            assert np.all(np.diff(b) <= tol * b[:-1])

    def test_singular_information_flagged(self):
        D = 3
        nm = NoiseModel(N=5, m=1, process=np.full(D, np.inf), measurement=np.full(D, np.inf))
        with pytest.warns(SingularInformation):
            b = pcrlb_recursion(SisParams(0.1, 0.1, np.full(D, 1 / D)), nm, 2, mc_draws=4, seed=0)
        assert np.all(np.isfinite(b))

    def test_reproducible(self):
        a = pcrlb_recursion(ER, FILTER_NOISE, 5, mc_draws=20, seed=9)
        b = pcrlb_recursion(ER, FILTER_NOISE, 5, mc_draws=20, seed=9)
        np.testing.assert_array_equal(a, b)
