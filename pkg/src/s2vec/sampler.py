"""Random walks with degree-smoothed neighbor choice and a stay probability,
plus Gaussian corruption of node coordinates."""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .graph import SpatialGraph


class SamplingError(DataError):
    pass


@dataclass(frozen=True)
class SamplerConfig:
    walk_length: int = 20
    num_walks_per_graph: int = 10
    move_probability: float = 0.8
    smoother: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.walk_length < 2:
            raise ConfigError("walk_length must be >= 2")
        if self.num_walks_per_graph < 1:
            raise ConfigError("num_walks_per_graph must be >= 1")
        if not 0.0 < self.move_probability <= 1.0:
            raise ConfigError("move_probability must lie in (0, 1]")
        if self.smoother < 0:
            raise ConfigError("smoother must be non-negative")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")


@dataclass(frozen=True, eq=False)
class Path:
    node_ids: np.ndarray
    coords: np.ndarray
    source_graph_id: str = ""

    def __post_init__(self):
        if len(self.node_ids) < 1 or len(self.node_ids) != len(self.coords):
            raise DataError("path needs >= 1 step and one coordinate per step")

    def __len__(self):
        return len(self.node_ids)

    @property
    def steps(self):
        return [(int(i), float(x), float(y)) for i, (x, y) in zip(self.node_ids, self.coords)]

    def __eq__(self, other):
        if not isinstance(other, Path):
            return NotImplemented
        return (self.source_graph_id == other.source_graph_id
                and np.array_equal(self.node_ids, other.node_ids)
                and np.array_equal(self.coords, other.coords))


@dataclass
class SamplingStats:
    """Diagnostics accumulated while sampling."""

    isolated_starts: int = 0
    walks: int = 0


def transition_distribution(g: SpatialGraph, v: int, smoother: float):
    """Neighbors of ``v`` and the probability of moving to each.

    p(u | v) = (deg(u) + smoother) / sum over neighbors s of (deg(s) + smoother).
    """
    nbrs = g.neighbors(v)
    if not nbrs:
        raise SamplingError(f"node {v} has no neighbors")
    weights = np.array([g.degree(u) + smoother for u in nbrs], dtype=np.float64)
    total = weights.sum()
    if total <= 0:
        # smoother 0 and all neighbor degrees 0 cannot happen in a simple graph
        # (each neighbor has degree >= 1), kept as a guard
        raise SamplingError(f"degenerate transition weights at node {v}")
    return nbrs, weights / total


def walk_rng(seed: int, graph_id: str, walk_index: int) -> np.random.Generator:
    """Independent generator for one walk, keyed by ``(seed, graph_id, walk_index)``."""
    key = zlib.crc32(graph_id.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence([seed, key, walk_index]))


class _Walker:
    """Per-graph cache of neighbor index arrays and cumulative transition tables."""

    def __init__(self, g: SpatialGraph, smoother: float):
        self.g = g
        self.tables = []
        for node in g.nodes:
            if g.degree(node.id):
                nbrs, probs = transition_distribution(g, node.id, smoother)
                idx = np.array([g.index_of(u) for u in nbrs])
                self.tables.append((idx, np.cumsum(probs)))
            else:
                self.tables.append(None)

    def walk(self, cfg: SamplerConfig, rng: np.random.Generator, stats=None):
        n = len(self.g)
        cur = int(rng.integers(n))
        if stats is not None:
            stats.walks += 1
            if self.tables[cur] is None:
                stats.isolated_starts += 1
        out = np.empty(cfg.walk_length, dtype=np.int64)
        out[0] = cur
        for t in range(1, cfg.walk_length):
            table = self.tables[cur]
            if table is not None and rng.random() < cfg.move_probability:
                idx, cdf = table
                k = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
                cur = int(idx[min(k, len(idx) - 1)])
            out[t] = cur
        return out


def _make_path(g: SpatialGraph, indices: np.ndarray, graph_id: str) -> Path:
    return Path(g.ids[indices].copy(), g.coords[indices].copy(), graph_id)


def sample_path(g: SpatialGraph, cfg: SamplerConfig, rng: np.random.Generator,
                graph_id: str = "", stats: SamplingStats | None = None) -> Path:
    """One walk of exactly ``cfg.walk_length`` recorded steps.

    The start node is uniform over the graph. At each later step the walker moves
    with probability ``move_probability`` to a neighbor drawn from
    :func:`transition_distribution`, otherwise it stays and the repeated node is
    recorded. A walk starting on an isolated node only stays; such starts are
    counted in ``stats.isolated_starts``.
    """
    return _make_path(g, _Walker(g, cfg.smoother).walk(cfg, rng, stats), graph_id)


def sample_path_set(g: SpatialGraph, cfg: SamplerConfig, graph_id: str = "",
                    stats: SamplingStats | None = None, walk_indices=None) -> list[Path]:
    walker = _Walker(g, cfg.smoother)
    if walk_indices is None:
        walk_indices = range(cfg.num_walks_per_graph)
    return [_make_path(g, walker.walk(cfg, walk_rng(cfg.seed, graph_id, w), stats), graph_id)
            for w in walk_indices]


def gaussian_displacements(g: SpatialGraph, noise_magnitude: float,
                           rng: np.random.Generator) -> np.ndarray:
    if noise_magnitude < 0:
        raise ConfigError("noise magnitude must be non-negative")
    return noise_magnitude * rng.standard_normal(size=g.coords.shape)


def corrupt_graph(g: SpatialGraph, noise_magnitude: float, rng: np.random.Generator) -> SpatialGraph:
    """Displace every coordinate by ``noise_magnitude * N(0, 1)``; ids and edges unchanged."""
    if noise_magnitude < 0:
        raise ConfigError("noise magnitude must be non-negative")
    if noise_magnitude == 0:
        return g
    return g.with_coords(g.coords + gaussian_displacements(g, noise_magnitude, rng))


def replay_path(path: Path, g: SpatialGraph) -> Path:
    """The same node-id sequence read off another version of the graph (e.g. corrupted)."""
    idx = np.array([g.index_of(int(v)) for v in path.node_ids])
    return _make_path(g, idx, path.source_graph_id)


def write_path_dump(paths_by_graph, fh) -> None:
    """TSV ``graph_id, walk_idx, node_id, x, y`` for a mapping graph_id -> list of paths."""
    for gid, paths in paths_by_graph.items():
        for w, p in enumerate(paths):
            for node_id, (x, y) in zip(p.node_ids, p.coords):
                fh.write(f"{gid}\t{w}\t{int(node_id)}\t{float(x)!r}\t{float(y)!r}\n")
