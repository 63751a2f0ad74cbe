import logging

import numpy as np
import pytest

from s2vec.baselines import flatten_dataset, flatten_graph, pca_baseline_embed, pca_project
from s2vec.errors import ConfigError, DataError
from s2vec.graph import GraphDataset, SpatialGraph, SpatialNode
from s2vec.synthetic import generate_synthetic_dataset


def graph(*xy):
    return SpatialGraph([SpatialNode(i, float(x), float(y)) for i, (x, y) in enumerate(xy)])


def test_flatten_sorts_by_x_then_y_then_id_and_pads():
    g = SpatialGraph([SpatialNode(0, 2, 1), SpatialNode(1, 0, 5), SpatialNode(2, 2, 0)])
    assert flatten_graph(g, 4).tolist() == [0, 5, 2, 0, 2, 1, 0, 0]
    with pytest.raises(DataError):
        flatten_graph(g, 2)


def test_flatten_ignores_node_ids_and_edges():
    a = SpatialGraph([SpatialNode(5, 1, 1), SpatialNode(9, 0, 0)], [(5, 9)])
    b = graph((0, 0), (1, 1))
    assert np.array_equal(flatten_graph(a, 2), flatten_graph(b, 2))


def test_flatten_is_invariant_to_node_order():
    rng = np.random.default_rng(0)
    pts = rng.integers(0, 3, (8, 2)).astype(float)  # many ties in x
    nodes = [SpatialNode(i, x, y) for i, (x, y) in enumerate(pts)]
    ref = flatten_graph(SpatialGraph(nodes), 10)
    for _ in range(10):
        shuffled = [nodes[i] for i in rng.permutation(8)]
        assert np.array_equal(flatten_graph(SpatialGraph(shuffled), 10), ref)


def test_flatten_dataset_uses_largest_graph():
    ds = GraphDataset([graph((0, 0)), graph((1, 1), (2, 2), (3, 3))], ["a", "b"])
    assert flatten_dataset(ds).shape == (2, 6)


def test_pca_on_a_line():
    X = np.array([[t, 2 * t] for t in (-2.0, -1.0, 0.0, 1.0, 2.0)])
    res = pca_project(X, 1)
    assert res.components[0] == pytest.approx(np.array([1, 2]) / np.sqrt(5))
    assert res.projected[:, 0] == pytest.approx(np.array([-2, -1, 0, 1, 2]) * np.sqrt(5))
    assert res.explained_variance_ratio[0] == pytest.approx(1.0)


def test_pca_matches_svd_oracle():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(30, 6)) @ rng.normal(size=(6, 6))
    res = pca_project(X, 4)
    centered = X - X.mean(axis=0)
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    for k in range(4):
        ref = vt[k] * np.sign(vt[k][np.argmax(np.abs(vt[k]))])
        assert np.allclose(res.components[k], ref, atol=1e-10)
    assert np.allclose(res.eigenvalues, s[:4] ** 2 / 29, rtol=1e-10)
    assert np.allclose(res.components @ res.components.T, np.eye(4), atol=1e-12)
    assert np.all(np.diff(res.eigenvalues) <= 0)


def test_pca_top_component_matches_power_iteration():
    rng = np.random.default_rng(1)
    for _ in range(5):
        X = rng.normal(size=(10, 6)) * np.arange(1, 7)
        C = np.cov(X, rowvar=False)
        v = np.ones(6)
        for _ in range(5000):
            v = C @ v
            v /= np.linalg.norm(v)
        res = pca_project(X, 1)
        v *= np.sign(v[np.argmax(np.abs(v))])
        assert np.allclose(res.components[0], v, atol=1e-8)
        assert res.eigenvalues[0] == pytest.approx(v @ C @ v, abs=1e-8)


def test_pca_full_dimension_is_isometry_and_truncation_contracts():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(12, 5))
    full = pca_project(X, 5).projected
    part = pca_project(X, 2).projected
    d = lambda A: np.linalg.norm(A[:, None] - A[None, :], axis=-1)
    assert np.allclose(d(full), d(X), atol=1e-8)
    assert np.all(d(part) <= d(X) + 1e-12)
    assert np.allclose(pca_project(X, 5).components @ pca_project(X, 5).components.T, np.eye(5), atol=1e-8)


def test_identical_graphs_embed_identically():
    g = graph((0, 0), (1, 2), (3, 1))
    ds = GraphDataset([g, g, graph((5, 5), (6, 6), (7, 5))], ["a", "b", "c"])
    emb = pca_baseline_embed(ds, 2)
    assert np.array_equal(emb.vectors[0], emb.vectors[1])


def test_pca_rank_deficiency_warns(caplog):
    X = np.array([[1.0, 1.0, 0.0], [2.0, 2.0, 0.0], [3.0, 3.0, 0.0]])
    with caplog.at_level(logging.WARNING, logger="s2vec.baselines"):
        res = pca_project(X, 2)
    assert "rank" in caplog.text
    assert np.all(res.projected[:, 1] == 0)


def test_pca_bounds():
    X = np.zeros((4, 3))
    with pytest.raises(ConfigError):
        pca_project(X, 4)
    with pytest.raises(ConfigError):
        pca_project(X, 0)
    with pytest.raises(DataError):
        pca_project(np.zeros((1, 3)), 1)


def test_baseline_embed_shape_and_determinism():
    ds = generate_synthetic_dataset(2, 4, 5, 0.1, 8.0, 3.0, seed=0)
    a = pca_baseline_embed(ds, 3)
    assert a.vectors.shape == (8, 3) and a.graph_ids == tuple(ds.ids)
    assert np.array_equal(a.vectors, pca_baseline_embed(ds, 3).vectors)
