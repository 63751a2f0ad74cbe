"""Spatial graph data model, ``.sg`` file I/O, Hausdorff distances and statistics."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, ParseError


@dataclass(frozen=True)
class SpatialNode:
    id: int
    x: float
    y: float


class SpatialGraph:
    """Undirected simple graph whose vertices carry planar coordinates.

    Instances are immutable after construction. ``adjacency`` is aligned with
    ``nodes``: ``adjacency[i]`` holds the neighbor ids of ``nodes[i]``.
    """

    __slots__ = ("nodes", "adjacency", "_index", "_coords", "_ids")

    def __init__(self, nodes: Sequence[SpatialNode], edges: Iterable[tuple[int, int]] = ()):
        nodes = tuple(nodes)
        if not nodes:
            raise DataError("graph must contain at least one node")
        index = {}
        for i, node in enumerate(nodes):
            if node.id < 0:
                raise DataError(f"negative node id {node.id}")
            if node.id in index:
                raise DataError(f"duplicate node id {node.id}")
            if not (math.isfinite(node.x) and math.isfinite(node.y)):
                raise DataError(f"node {node.id} has non-finite coordinates")
            index[node.id] = i
        neighbors: list[list[int]] = [[] for _ in nodes]
        seen = set()
        for a, b in edges:
            if a not in index or b not in index:
                raise DataError(f"edge ({a}, {b}) references unknown node id")
            if a == b:
                raise DataError(f"self-loop on node {a}")
            key = (min(a, b), max(a, b))
            if key in seen:
                raise DataError(f"duplicate edge {key}")
            seen.add(key)
            neighbors[index[a]].append(b)
            neighbors[index[b]].append(a)
        self.nodes = nodes
        self.adjacency = tuple(tuple(sorted(n)) for n in neighbors)
        self._index = index
        coords = np.array([(n.x, n.y) for n in nodes], dtype=np.float64)
        coords.setflags(write=False)
        self._coords = coords
        ids = np.array([n.id for n in nodes], dtype=np.int64)
        ids.setflags(write=False)
        self._ids = ids

    @property
    def coords(self) -> np.ndarray:
        """Read-only ``(|V|, 2)`` coordinate array in node order."""
        return self._coords

    @property
    def ids(self) -> np.ndarray:
        return self._ids

    def __len__(self):
        return len(self.nodes)

    def index_of(self, node_id: int) -> int:
        return self._index[node_id]

    def has_node(self, node_id: int) -> bool:
        return node_id in self._index

    def neighbors(self, node_id: int) -> tuple[int, ...]:
        return self.adjacency[self._index[node_id]]

    def degree(self, node_id: int) -> int:
        return len(self.adjacency[self._index[node_id]])

    def edges(self) -> list[tuple[int, int]]:
        """Edges as ``(smaller id, larger id)`` in node order, then neighbor order."""
        out = []
        for node, nbrs in zip(self.nodes, self.adjacency):
            out.extend((node.id, u) for u in nbrs if u > node.id)
        return out

    def num_edges(self) -> int:
        return sum(len(n) for n in self.adjacency) // 2

    def with_coords(self, coords) -> SpatialGraph:
        """Same ids and edges, new coordinates (row ``i`` for ``nodes[i]``)."""
        coords = np.asarray(coords, dtype=np.float64)
        if coords.shape != self._coords.shape:
            raise DataError("coordinate array shape does not match node count")
        nodes = [SpatialNode(n.id, float(x), float(y)) for n, (x, y) in zip(self.nodes, coords)]
        return SpatialGraph(nodes, self.edges())

    def __eq__(self, other):
        if not isinstance(other, SpatialGraph):
            return NotImplemented
        return self.nodes == other.nodes and self.adjacency == other.adjacency

    def __hash__(self):
        return hash((self.nodes, self.adjacency))

    def __repr__(self):
        return f"SpatialGraph(|V|={len(self.nodes)}, |E|={self.num_edges()})"


@dataclass(frozen=True)
class GraphDataset:
    graphs: tuple[SpatialGraph, ...]
    ids: tuple[str, ...]
    labels: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "graphs", tuple(self.graphs))
        object.__setattr__(self, "ids", tuple(self.ids))
        if len(self.graphs) != len(self.ids):
            raise DataError("graphs and ids differ in length")
        if len(set(self.ids)) != len(self.ids):
            raise DataError("graph ids must be unique")
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(int(v) for v in self.labels))
            if len(self.labels) != len(self.graphs):
                raise DataError("labels must cover every graph")

    def __len__(self):
        return len(self.graphs)

    def subset(self, order: Sequence[int]) -> GraphDataset:
        labels = None if self.labels is None else [self.labels[i] for i in order]
        return GraphDataset([self.graphs[i] for i in order], [self.ids[i] for i in order], labels)


@dataclass(frozen=True)
class DistanceMatrix:
    ids: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        m = len(self.ids)
        if values.shape != (m, m):
            raise DataError(f"distance matrix must be {m}x{m}, got {values.shape}")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise DataError("distances must be finite and non-negative")
        if not np.array_equal(values, values.T):
            raise DataError("distance matrix must be symmetric")
        if np.any(np.diag(values) != 0):
            raise DataError("distance matrix must have a zero diagonal")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "values", values)

    @property
    def size(self) -> int:
        return len(self.ids)

    def off_diagonal(self) -> np.ndarray:
        iu = np.triu_indices(self.size, k=1)
        return self.values[iu]


# --------------------------------------------------------------------------
# .sg format

def parse_subgraph(text: str) -> SpatialGraph:
    nodes = []
    seen_ids = {}
    edges = []
    seen_edges = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        kind = parts[0]
        if kind == "node":
            if len(parts) != 4:
                raise ParseError("expected 'node <id> <x> <y>'", lineno)
            try:
                node_id = int(parts[1])
                x, y = float(parts[2]), float(parts[3])
            except ValueError:
                raise ParseError(f"malformed node record {line!r}", lineno) from None
            if node_id < 0:
                raise ParseError(f"negative node id {node_id}", lineno)
            if not (math.isfinite(x) and math.isfinite(y)):
                raise ParseError(f"non-finite coordinate for node {node_id}", lineno)
            if node_id in seen_ids:
                raise ParseError(f"duplicate node id {node_id} (first on line {seen_ids[node_id]})", lineno)
            seen_ids[node_id] = lineno
            nodes.append(SpatialNode(node_id, x, y))
        elif kind == "edge":
            if len(parts) != 3:
                raise ParseError("expected 'edge <id1> <id2>'", lineno)
            try:
                a, b = int(parts[1]), int(parts[2])
            except ValueError:
                raise ParseError(f"malformed edge record {line!r}", lineno) from None
            for v in (a, b):
                if v not in seen_ids:
                    raise ParseError(f"unknown node id {v}", lineno)
            if a == b:
                raise ParseError(f"self-loop on node {a}", lineno)
            key = (min(a, b), max(a, b))
            if key in seen_edges:
                raise ParseError(f"duplicate edge {key[0]}-{key[1]}", lineno)
            seen_edges[key] = lineno
            edges.append((a, b))
        else:
            raise ParseError(f"unknown record type {kind!r}", lineno)
    if not nodes:
        raise ParseError("no node records")
    return SpatialGraph(nodes, edges)


def _fmt(v: float) -> str:
    return repr(float(v))


def write_subgraph(g: SpatialGraph) -> str:
    lines = [f"node {n.id} {_fmt(n.x)} {_fmt(n.y)}" for n in g.nodes]
    lines.extend(f"edge {a} {b}" for a, b in g.edges())
    return "\n".join(lines) + "\n"


def read_labels(path) -> dict[str, int]:
    labels = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError("expected '<graph_id>\\t<label>'", lineno)
            try:
                labels[parts[0]] = int(parts[1])
            except ValueError:
                raise ParseError(f"non-integer label {parts[1]!r}", lineno) from None
    return labels


def load_dataset(directory) -> GraphDataset:
    """Read every ``*.sg`` file of a directory (sorted by name) plus optional ``labels.tsv``."""
    directory = Path(directory)
    files = sorted(directory.glob("*.sg"))
    if not files:
        raise DataError(f"no .sg files in {directory}")
    graphs, ids = [], []
    for f in files:
        try:
            graphs.append(parse_subgraph(f.read_text(encoding="utf-8")))
        except ParseError as exc:
            raise ParseError(f"{f.name}: {exc}") from None
        ids.append(f.stem)
    labels = None
    label_file = directory / "labels.tsv"
    if label_file.exists():
        table = read_labels(label_file)
        missing = [i for i in ids if i not in table]
        if missing:
            raise DataError(f"labels.tsv lacks entries for {missing[:5]}")
        labels = [table[i] for i in ids]
    return GraphDataset(graphs, ids, labels)


def save_dataset(ds: GraphDataset, directory) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for gid, g in zip(ds.ids, ds.graphs):
        path = directory / f"{gid}.sg"
        path.write_text(write_subgraph(g), encoding="utf-8", newline="\n")
        written.append(path)
    if ds.labels is not None:
        path = directory / "labels.tsv"
        path.write_text("".join(f"{gid}\t{lab}\n" for gid, lab in zip(ds.ids, ds.labels)),
                        encoding="utf-8", newline="\n")
        written.append(path)
    return written


def write_distance_matrix(dm: DistanceMatrix, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("id\t" + "\t".join(dm.ids) + "\n")
        for gid, row in zip(dm.ids, dm.values):
            fh.write(gid + "\t" + "\t".join(_fmt(v) for v in row) + "\n")


def read_distance_matrix(path) -> DistanceMatrix:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        ids = header[1:]
        rows = []
        for line in fh:
            parts = line.rstrip("\n").split("\t")
            if not parts or parts == [""]:
                continue
            rows.append([float(v) for v in parts[1:]])
    return DistanceMatrix(ids, np.array(rows, dtype=np.float64).reshape(len(ids), len(ids)))


# --------------------------------------------------------------------------
# Hausdorff distances over node coordinate sets (edges are ignored)

_CHUNK = 2048


def one_sided_hausdorff(g1: SpatialGraph, g2: SpatialGraph) -> float:
    """max over nodes of ``g1`` of the distance to the nearest node of ``g2``."""
    a = _point_set(g1)
    b = _point_set(g2)
    worst = 0.0
    # Squared distances are compared and a single sqrt taken at the end; sqrt is
    # monotone and correctly rounded, so the result equals the per-pair sqrt form.
    for start in range(0, len(a), _CHUNK):
        block = a[start:start + _CHUNK]
        dx = block[:, 0:1] - b[None, :, 0]
        dy = block[:, 1:2] - b[None, :, 1]
        sq = dx * dx + dy * dy
        worst = max(worst, float(sq.min(axis=1).max()))
    return math.sqrt(worst)


def gromov_hausdorff(g1: SpatialGraph, g2: SpatialGraph) -> float:
    return max(one_sided_hausdorff(g1, g2), one_sided_hausdorff(g2, g1))


def _point_set(g) -> np.ndarray:
    coords = g.coords if isinstance(g, SpatialGraph) else np.asarray(g, dtype=np.float64)
    if coords.ndim != 2 or coords.shape[0] == 0:
        raise DataError("Hausdorff distance needs non-empty point sets")
    return coords


def pairwise_gh_matrix(ds: GraphDataset, threads: int = 1) -> DistanceMatrix:
    m = len(ds)
    values = np.zeros((m, m), dtype=np.float64)

    def fill_row(i):
        for j in range(i + 1, m):
            values[i, j] = gromov_hausdorff(ds.graphs[i], ds.graphs[j])

    if threads > 1 and m > 2:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill_row, range(m)))
    else:
        for i in range(m):
            fill_row(i)
    values = values + values.T
    return DistanceMatrix(ds.ids, values)


# --------------------------------------------------------------------------
# statistics

@dataclass(frozen=True)
class GraphStats:
    avg_degree: float
    clustering_coefficient: float


def graph_stats(g: SpatialGraph) -> GraphStats:
    """Average degree ``2|E|/|V|`` and mean local clustering coefficient."""
    nbr_sets = [set(a) for a in g.adjacency]
    index = g._index
    total = 0.0
    for i, nbrs in enumerate(nbr_sets):
        k = len(nbrs)
        if k < 2:
            continue
        links = sum(len(nbr_sets[index[u]] & nbrs) for u in nbrs) / 2
        total += links / (k * (k - 1) / 2)
    n = len(g)
    return GraphStats(2.0 * g.num_edges() / n, total / n)


def default_threads() -> int:
    return max(1, min(8, os.cpu_count() or 1))
