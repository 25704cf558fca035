import io

import networkx as nx
import numpy as np
import pytest

from socsense.errors import Disconnected, NoEdges
from socsense.graphs import (
    DupDelParams,
    Graph,
    Sampler,
    complete_graph,
    configuration_graph,
    cycle_graph,
    dup_del_step,
    empty_graph,
    folded_histogram,
    generate_er,
    generate_powerlaw,
    is_connected,
    path_graph,
    random_walk_sample,
    read_edgelist,
    sample_edge_endpoint,
    sample_random_friend,
    sample_uniform_node,
    star_graph,
    survival_slope,
    write_edgelist,
)

TWO_REGIME = DupDelParams((0.5, 0.5), (0.2, 0.6), np.array([[-1.0, 1.0], [1.0, -1.0]]), 0.01)
# seeded 10^5-step run of TWO_REGIME: (nodes, edges, final regime), degree counts 0..5
REGRESSION_SIZE = (712, 672, 1)
REGRESSION_HIST = [114, 240, 161, 95, 58, 22]


def to_nx(g):
    h = nx.DiGraph() if g.directed else nx.Graph()
    h.add_nodes_from(g.nodes)
    h.add_edges_from(g.edges())
    return h


def tv(p, q):
    n = max(len(p), len(q))
    return 0.5 * np.abs(np.pad(p, (0, n - len(p))) - np.pad(q, (0, n - len(q)))).sum()


class TestGraph:
    def test_no_loops_or_duplicates(self):
        g = empty_graph(3)
        assert g.add_edge(0, 1)
        assert not g.add_edge(1, 0)
        assert not g.add_edge(2, 2)
        assert g.n_edges == 1
        g.check_simple()

    def test_directed_followers(self):
        g = empty_graph(3, directed=True)
        g.add_edge(0, 1)
        g.add_edge(2, 1)
        g.add_edge(1, 0)
        assert g.followers(1) == 2 and g.followees(1) == 1
        assert g.in_degrees().sum() == g.out_degrees().sum() == g.n_edges == 3
        g.remove_node(1)
        assert g.n_edges == 0
        g.check_simple()

    def test_remove_keeps_positions(self):
        g = path_graph(5)
        g.remove_node(1)
        assert sorted(g.nodes) == [0, 2, 3, 4]
        assert all(g.nodes[g.index(u)] == u for u in g.nodes)
        assert g.n_edges == 2
        g.check_simple()

    def test_matches_networkx(self):
        g = generate_er(300, 0.01, 5)
        h = to_nx(g)
        assert nx.degree_histogram(h) == list(g.degree_histogram())
        assert nx.is_connected(h) == is_connected(g)


class TestGenerators:
    def test_er_extremes(self):
        assert generate_er(20, 0.0, 1).n_edges == 0
        g = generate_er(20, 1.0, 1)
        assert g.n_edges == 190
        g.check_simple()

    def test_er_mean_degree(self):
        g = generate_er(10_000, 5e-4, 3)
        assert abs(g.degrees().mean() - 9999 * 5e-4) <= 0.1 * 9999 * 5e-4
        assert g.degree_histogram().sum() == 10_000

    @pytest.mark.parametrize("seed", range(5))
    def test_powerlaw_survival_slope(self, seed):
        g = generate_powerlaw(10_000, 2.7, seed)
        assert -2.0 <= survival_slope(g.degrees(), d_hi=50) <= -1.4
        assert g.degree_histogram().sum() == 10_000
        assert g.degrees().max() <= 100

    def test_powerlaw_degree_one(self):
        g = generate_powerlaw(10, 3.0, 0, d_max=1)
        assert g.degrees().max() <= 1
        assert g.n_edges <= 5
        assert all(len(c) <= 2 for c in nx.connected_components(to_nx(g)))

    def test_configuration_conserves_nodes(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            deg = rng.integers(0, 6, size=50)
            g = configuration_graph(deg, rng)
            g.check_simple()
            assert len(g) == 50 and np.all(g.degrees() <= deg)


class TestDupDel:
    def test_full_copy(self):
        p = DupDelParams.static(1.0, 1.0)
        g = path_graph(2)
        rng = np.random.default_rng(0)
        for k in range(20):
            nbrs_before = {u: set(g.succ[u]) for u in g.nodes}
            dup_del_step(g, p, 0, rng)
            assert len(g) == 3 + k
            v = g.nodes[-1]
            assert any(u in g.succ[v] and g.succ[v] - {u} == nb for u, nb in nbrs_before.items())
            g.check_simple()
        # full copying of a connected seed gives a complete graph
        assert g.n_edges == len(g) * (len(g) - 1) // 2

    def test_pure_deletion(self):
        p = DupDelParams.static(0.0, 0.5)
        g = generate_er(30, 0.2, 1)
        rng = np.random.default_rng(1)
        for k in range(40):
            dup_del_step(g, p, 0, rng)
            assert len(g) == max(1, 29 - k)
        assert len(g) == 1

    def test_counts_stay_in_sync(self):
        rng = np.random.default_rng(2)
        g = generate_er(200, 0.02, rng)
        counts = folded_histogram(g.degrees(), 6)
        for k in range(3000):
            dup_del_step(g, TWO_REGIME, k // 1000 % 2, rng, counts)
            if k % 50 == 0:
                g.check_simple()
                np.testing.assert_array_equal(counts, folded_histogram(g.degrees(), 6))
                assert g.degree_histogram().sum() == len(g)

    def test_two_regime_regression(self):
        rng = np.random.default_rng(2024)
        g = generate_er(1000, 1.25 / 999, rng)
        theta = 0
        A = TWO_REGIME.transition
        for _ in range(100_000):
            if rng.random() >= A[theta, theta]:
                theta = 1 - theta
            dup_del_step(g, TWO_REGIME, theta, rng)
        hist = g.degree_histogram()
        assert hist.sum() == len(g)
        assert (len(g), g.n_edges, theta) == REGRESSION_SIZE
        np.testing.assert_array_equal(hist[:6], REGRESSION_HIST)

    def test_bad_params(self):
        with pytest.raises(ValueError):
            DupDelParams((1.2,), (0.5,), np.zeros((1, 1)), 0.0)
        with pytest.raises(ValueError):
            DupDelParams((0.5, 0.5), (0.5, 0.5), np.array([[-1.0, 1.0], [1.0, -1.0]]), 2.0)


class TestSamplers:
    def test_regular_graph(self):
        g = cycle_graph(12)
        rng = np.random.default_rng(0)
        for f in (sample_uniform_node, sample_edge_endpoint, sample_random_friend):
            nodes = f(g, rng, 200)
            assert np.all(g.degrees()[[g.index(u) for u in nodes]] == 2)

    def test_star_hub_probability(self):
        g = star_graph(8)
        s = Sampler(g)
        # exact: the hub is 8 of the 16 adjacency entries
        assert np.sum(s.indices == g.index(0)) / s.indices.size == 0.5
        hits = np.mean(sample_edge_endpoint(g, np.random.default_rng(1), 100_000) == 0)
        assert abs(hits - 0.5) < 0.01

    def test_single_edge(self):
        g = path_graph(2)
        rng = np.random.default_rng(2)
        for f in (sample_uniform_node, sample_edge_endpoint, sample_random_friend):
            assert abs(np.mean(f(g, rng, 20_000)) - 0.5) < 0.02

    def test_edge_endpoint_is_degree_biased(self):
        for g in (generate_er(500, 0.01, 3), generate_powerlaw(2000, 2.7, 4), star_graph(20)):
            deg = g.degrees()
            law = np.bincount(deg, weights=deg) / deg.sum()
            draws = Sampler(g).edge_endpoint(np.random.default_rng(5), 100_000)
            emp = np.bincount(deg[draws], minlength=law.size) / draws.size
            assert tv(emp, law) <= 0.02

    def test_friend_skips_isolated(self):
        g = empty_graph(5)
        g.add_edge(0, 1)
        draws = sample_random_friend(g, np.random.default_rng(6), 1000)
        assert set(np.unique(draws)) == {0, 1}

    def test_no_edges(self):
        g = empty_graph(4)
        rng = np.random.default_rng(7)
        with pytest.raises(NoEdges):
            sample_edge_endpoint(g, rng)
        with pytest.raises(NoEdges):
            sample_random_friend(g, rng)
        assert sample_uniform_node(g, rng) in g.nodes


class TestRandomWalk:
    def test_complete_graph_uniform(self):
        walk = random_walk_sample(complete_graph(5), 100, 3, 20_000, seed=0)
        freq = np.bincount(walk) / len(walk)
        assert np.all(np.abs(freq - 0.2) < 0.015)

    def test_two_node_path_alternates(self):
        walk = random_walk_sample(path_graph(2), 0, 1, 10, seed=1)
        assert all(a != b for a, b in zip(walk, walk[1:]))
        assert np.mean(walk) == 0.5

    def test_star_hub_frequency(self):
        walk = np.array(random_walk_sample(star_graph(5), 10, 1, 20_001, seed=2))
        assert abs(np.mean(walk == 0) - 0.5) < 0.01

    def test_disconnected(self):
        g = path_graph(2)
        g.add_node()
        with pytest.raises(Disconnected):
            random_walk_sample(g, 0, 1, 5, seed=3)


class TestEdgeList:
    def test_roundtrip_directed(self):
        g = empty_graph(4, directed=True)
        g.color.update({0: "red", 1: "blue", 2: "blue", 3: "red"})
        g.label.update({0: 1, 2: 0})
        for u, v in [(0, 1), (1, 0), (2, 1)]:
            g.add_edge(u, v)
        buf = io.StringIO()
        write_edgelist(g, buf)
        h = read_edgelist(buf.getvalue().splitlines())
        assert h.directed and sorted(h.nodes) == [0, 1, 2, 3]
        assert sorted(h.edges()) == sorted(g.edges())
        assert h.color == g.color and h.label == g.label

    def test_undirected_text(self):
        text = "# color 3 red\n# label 3 1\n1 2\n2 3\n"
        g = read_edgelist(text.splitlines())
        assert not g.directed and g.n_edges == 2
        assert g.color[3] == "red" and g.label[3] == 1 and g.label[1] is None

    def test_rejects_bad_lines(self):
        with pytest.raises(ValueError):
            read_edgelist(["1 2 3"])
        with pytest.raises(ValueError):
            read_edgelist(["# color 1 green"])
