"""Seeded generator of labeled spatial-graph datasets.

Each cluster owns a template point set scattered around a cluster center;
members copy the template with bounded per-node jitter and are wired as
random geometric graphs, so members of one cluster are close in Hausdorff
distance while different clusters are far apart.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigError
from .graph import GraphDataset, SpatialGraph, SpatialNode

_ATTEMPTS_PER_RESTART = 1_000
_MAX_RESTARTS = 200


def place_centers(k, min_separation, region_size, rng) -> np.ndarray:
    """Rejection-sample ``k`` points in a square with pairwise distance >= ``min_separation``.

    Sequential placement can paint itself into a corner, so a stuck attempt
    starts over from scratch.
    """
    for _ in range(_MAX_RESTARTS):
        centers = []
        attempts = 0
        while len(centers) < k and attempts < _ATTEMPTS_PER_RESTART:
            attempts += 1
            p = rng.uniform(0.0, region_size, size=2)
            if all(math.dist(p, c) >= min_separation for c in centers):
                centers.append(p)
        if len(centers) == k:
            return np.array(centers)
    raise ConfigError(
        f"cannot place {k} centers {min_separation} apart in a "
        f"{region_size}x{region_size} region; enlarge region_size")


def _uniform_disc(rng, n, radius):
    r = radius * np.sqrt(rng.uniform(0.0, 1.0, size=n))
    theta = rng.uniform(0.0, 2 * math.pi, size=n)
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


def geometric_edges(coords: np.ndarray, edge_radius: float) -> list[tuple[int, int]]:
    """Edges between node indices within ``edge_radius``, then components chained
    together (in order of their smallest index) through their closest node pair."""
    n = len(coords)
    diff = coords[:, None, :] - coords[None, :, :]
    dist = np.sqrt((diff ** 2).sum(-1))
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if dist[i, j] <= edge_radius]

    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in edges:
        parent[find(i)] = find(j)
    comps: dict[int, list[int]] = {}
    for i in range(n):
        comps.setdefault(find(i), []).append(i)
    ordered = sorted(comps.values(), key=min)
    for left, right in zip(ordered, ordered[1:]):
        sub = dist[np.ix_(left, right)]
        a, b = np.unravel_index(np.argmin(sub), sub.shape)
        i, j = left[a], right[b]
        edges.append((min(i, j), max(i, j)))
    return edges


def generate_synthetic_dataset(k_clusters: int, per_cluster: int, nodes_per_graph: int,
                               within_jitter: float, center_spread: float, edge_radius: float,
                               seed: int, template_radius: float | None = None,
                               region_size: float | None = None,
                               template_size: int | None = None) -> GraphDataset:
    """Labeled dataset of ``k_clusters * per_cluster`` connected spatial graphs.

    ``template_radius`` (default ``center_spread / 2``) bounds how far template
    nodes sit from their cluster center; ``region_size`` (default
    ``center_spread * (sqrt(k) + 1)``) is the side of the square in which centers
    are placed. ``template_size`` (default ``nodes_per_graph``) is the number of
    template sites per cluster; when it exceeds ``nodes_per_graph`` every member
    uses a random subset of the sites, mimicking communities of one area that
    differ in membership. Graph order is shuffled so labels do not follow index
    order.
    """
    if min(k_clusters, per_cluster, nodes_per_graph) < 1:
        raise ConfigError("cluster, member and node counts must be >= 1")
    if within_jitter < 0 or center_spread <= 0 or edge_radius < 0:
        raise ConfigError("jitter, spread and edge radius must be non-negative (spread > 0)")
    if within_jitter >= center_spread:
        raise ConfigError("within_jitter must be smaller than center_spread")
    if template_radius is None:
        template_radius = center_spread / 2
    if template_size is None:
        template_size = nodes_per_graph
    if template_size < nodes_per_graph:
        raise ConfigError("template_size must be >= nodes_per_graph")
    if region_size is None:
        region_size = center_spread * (math.sqrt(k_clusters) + 1)

    rng = np.random.default_rng(seed)
    centers = place_centers(k_clusters, center_spread, region_size, rng)
    members = []
    for label, center in enumerate(centers):
        template = center + _uniform_disc(rng, template_size, template_radius)
        for _ in range(per_cluster):
            sites = template
            if template_size > nodes_per_graph:
                sites = template[np.sort(rng.choice(template_size, nodes_per_graph, replace=False))]
            coords = sites + _uniform_disc(rng, nodes_per_graph, within_jitter)
            edges = geometric_edges(coords, edge_radius)
            nodes = [SpatialNode(i, float(x), float(y)) for i, (x, y) in enumerate(coords)]
            members.append((SpatialGraph(nodes, edges), label))

    order = rng.permutation(len(members))
    width = max(4, len(str(len(members) - 1)))
    graphs = [members[i][0] for i in order]
    labels = [members[i][1] for i in order]
    ids = [f"g{idx:0{width}d}" for idx in range(len(members))]
    return GraphDataset(graphs, ids, labels)
