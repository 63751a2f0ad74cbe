import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from s2vec.errors import ConfigError
from s2vec.graph import SpatialGraph, SpatialNode
from s2vec.sampler import (SamplerConfig, SamplingError, SamplingStats, corrupt_graph, replay_path,
                           sample_path, sample_path_set, transition_distribution, walk_rng)
from s2vec.synthetic import generate_synthetic_dataset


def graph(n, edges):
    return SpatialGraph([SpatialNode(i, float(i), float(i % 3)) for i in range(n)], edges)


# node 0 has neighbors 1 (degree 1) and 2 (degree 3)
FORK = graph(5, [(0, 1), (0, 2), (2, 3), (2, 4)])


def test_transition_distribution_example():
    nbrs, probs = transition_distribution(FORK, 0, 1.0)
    assert nbrs == (1, 2)
    assert probs == pytest.approx([1 / 3, 2 / 3], abs=1e-15)


def test_large_smoother_is_nearly_uniform():
    _, probs = transition_distribution(FORK, 0, 1e6)
    assert probs == pytest.approx([0.5, 0.5], abs=1e-5)
    # hub 0 whose neighbors have degrees 1..10
    edges, nxt = [], 11
    for k in range(1, 11):
        edges.append((0, k))
        for _ in range(k - 1):
            edges.append((k, nxt))
            nxt += 1
    _, probs = transition_distribution(graph(nxt, edges), 0, 1e6)
    assert probs.max() - probs.min() < 1e-5


def test_zero_smoother_is_degree_proportional():
    _, probs = transition_distribution(FORK, 0, 0.0)
    assert probs == pytest.approx([0.25, 0.75])


def test_isolated_node_has_no_distribution():
    with pytest.raises(SamplingError):
        transition_distribution(graph(2, []), 0, 1.0)


def test_empirical_transitions_within_three_sigma():
    cfg = SamplerConfig(walk_length=100_000, move_probability=1.0)
    ids = sample_path(FORK, cfg, np.random.default_rng(0)).node_ids
    for v in (0, 2):
        nbrs, probs = transition_distribution(FORK, v, 1.0)
        following = ids[1:][ids[:-1] == v]
        for u, p in zip(nbrs, probs):
            sigma = math.sqrt(p * (1 - p) / len(following))
            assert abs(np.mean(following == u) - p) < 3 * sigma


def test_stay_rate_matches_move_probability():
    cfg = SamplerConfig(walk_length=500, move_probability=0.6)
    ids = sample_path(FORK, cfg, np.random.default_rng(1)).node_ids
    stays = np.mean(ids[1:] == ids[:-1])
    sigma = math.sqrt(0.4 * 0.6 / 499)
    assert abs(stays - 0.4) < 3 * sigma


def test_single_node_graph_walk_stays():
    g = graph(1, [])
    stats = SamplingStats()
    paths = sample_path_set(g, SamplerConfig(walk_length=5, num_walks_per_graph=3), "solo", stats)
    assert all(list(p.node_ids) == [0] * 5 for p in paths)
    assert stats.isolated_starts == 3 and stats.walks == 3


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31), length=st.integers(2, 40), move=st.floats(0.05, 1.0))
def test_walk_shape_and_adjacency(seed, length, move):
    g = generate_synthetic_dataset(1, 1, 8, 0.1, 5.0, 1.5, seed=seed % 1000).graphs[0]
    p = sample_path(g, SamplerConfig(walk_length=length, move_probability=move), np.random.default_rng(seed))
    assert len(p) == length
    for a, b in zip(p.node_ids[:-1], p.node_ids[1:]):
        assert a == b or b in g.neighbors(int(a))
    for nid, (x, y) in zip(p.node_ids, p.coords):
        node = g.nodes[g.index_of(int(nid))]
        assert (node.x, node.y) == (x, y)


def test_path_sets_are_deterministic_and_order_free():
    g = generate_synthetic_dataset(1, 1, 10, 0.1, 5.0, 1.5, seed=3).graphs[0]
    cfg = SamplerConfig(walk_length=12, num_walks_per_graph=6, seed=7)
    a = sample_path_set(g, cfg, "g")
    b = sample_path_set(g, cfg, "g")
    assert a == b
    backwards = sample_path_set(g, cfg, "g", walk_indices=range(5, -1, -1))
    assert backwards == a[::-1]
    other = sample_path_set(g, SamplerConfig(walk_length=12, num_walks_per_graph=6, seed=8), "g")
    assert other != a


def test_walk_streams_differ_by_graph_and_index():
    draws = {(gid, w): walk_rng(0, gid, w).random() for gid in ("a", "b") for w in range(3)}
    assert len(set(draws.values())) == 6


def test_sampler_config_validation():
    for kwargs in ({"walk_length": 1}, {"num_walks_per_graph": 0}, {"move_probability": 0.0},
                   {"move_probability": 1.5}, {"smoother": -1}):
        with pytest.raises(ConfigError):
            SamplerConfig(**kwargs)


def test_corruption_statistics_and_structure():
    rng = np.random.default_rng(5)
    big = SpatialGraph([SpatialNode(i, float(i % 100), float(i // 100)) for i in range(10_000)])
    delta = 0.7
    disp = corrupt_graph(big, delta, rng).coords - big.coords
    n = len(disp)
    for axis in range(2):
        assert abs(disp[:, axis].mean()) < 3 * delta / math.sqrt(n)
        # std of the sample std is about delta / sqrt(2n)
        assert abs(disp[:, axis].std() - delta) < 3 * delta / math.sqrt(2 * n)
    g = generate_synthetic_dataset(1, 1, 10, 0.1, 5.0, 1.5, seed=0).graphs[0]
    c = corrupt_graph(g, delta, rng)
    assert c.ids.tolist() == g.ids.tolist() and c.edges() == g.edges()


def test_zero_noise_is_identity_and_negative_rejected():
    g = graph(3, [(0, 1)])
    assert corrupt_graph(g, 0.0, np.random.default_rng(0)) == g
    with pytest.raises(ConfigError):
        corrupt_graph(g, -0.1, np.random.default_rng(0))


def test_replay_reads_coordinates_from_other_graph():
    g = generate_synthetic_dataset(1, 1, 10, 0.1, 5.0, 1.5, seed=2).graphs[0]
    p = sample_path(g, SamplerConfig(walk_length=15), np.random.default_rng(0), "x")
    c = corrupt_graph(g, 0.5, np.random.default_rng(1))
    q = replay_path(p, c)
    assert np.array_equal(q.node_ids, p.node_ids) and q.source_graph_id == "x"
    expected = np.array([c.coords[c.index_of(int(v))] for v in p.node_ids])
    assert np.array_equal(q.coords, expected)
