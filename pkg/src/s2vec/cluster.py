"""DBSCAN on precomputed distances, the Adjusted Rand Index, and the
Hausdorff-based ground-truth evaluation."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform
from scipy.stats import rankdata

from .embedder import EmbeddingMatrix
from .errors import ConfigError, DataError, ParseError
from .graph import DistanceMatrix, GraphDataset, pairwise_gh_matrix


@dataclass(frozen=True)
class Partition:
    labels: tuple[int, ...]

    def __post_init__(self):
        labels = tuple(int(v) for v in self.labels)
        if labels and sorted(set(labels)) != list(range(max(labels) + 1)):
            raise DataError("partition labels must be dense 0..k-1")
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_labels(cls, labels) -> Partition:
        """Renumber arbitrary labels densely in order of first appearance."""
        mapping: dict = {}
        return cls(tuple(mapping.setdefault(v, len(mapping)) for v in labels))

    def __len__(self):
        return len(self.labels)

    @property
    def num_clusters(self) -> int:
        return len(set(self.labels))


@dataclass(frozen=True)
class DbscanParams:
    """``eps=None`` selects eps as the ``eps_percentile``-th percentile of off-diagonal distances."""

    eps: float | None = None
    min_pts: int = 3
    eps_percentile: float = 15.0

    def __post_init__(self):
        if self.eps is not None and not self.eps > 0:
            raise ConfigError("eps must be positive")
        if self.min_pts < 1:
            raise ConfigError("min_pts must be >= 1")
        if not 0 <= self.eps_percentile <= 100:
            raise ConfigError("eps_percentile must lie in [0, 100]")

    def resolve_eps(self, D: DistanceMatrix) -> float:
        if self.eps is not None:
            return self.eps
        off = D.off_diagonal()
        if len(off) == 0:
            return 1.0
        eps = float(np.percentile(off, self.eps_percentile))
        # a zero percentile (many duplicates) still has to admit the duplicates
        return eps if eps > 0 else np.nextafter(0.0, 1.0)


def euclidean_distance_matrix(emb: EmbeddingMatrix) -> DistanceMatrix:
    if len(emb) == 1:
        return DistanceMatrix(emb.graph_ids, np.zeros((1, 1)))
    return DistanceMatrix(emb.graph_ids, squareform(pdist(emb.vectors, "euclidean")))


def dbscan(D: DistanceMatrix, params: DbscanParams) -> Partition:
    """Classic DBSCAN on a precomputed matrix.

    A point is core when at least ``min_pts`` points (itself included) lie within
    ``eps``. Clusters grow from unvisited core points taken in index order; a
    border point keeps the first cluster that reaches it. Noise points become
    singleton clusters numbered after all density clusters.
    """
    eps = params.resolve_eps(D)
    values = D.values
    m = D.size
    neighborhoods = [np.flatnonzero(values[i] <= eps) for i in range(m)]
    core = [len(nb) >= params.min_pts for nb in neighborhoods]
    labels = [-1] * m
    cluster = 0
    for i in range(m):
        if labels[i] != -1 or not core[i]:
            continue
        labels[i] = cluster
        queue = deque([i])
        while queue:
            p = queue.popleft()
            if not core[p]:
                continue
            for q in neighborhoods[p]:
                if labels[q] == -1:
                    labels[q] = cluster
                    queue.append(q)
        cluster += 1
    for i in range(m):
        if labels[i] == -1:
            labels[i] = cluster
            cluster += 1
    return Partition(tuple(labels))


def _comb2(k: int) -> int:
    return k * (k - 1) // 2


def adjusted_rand_index(a: Partition, b: Partition) -> float:
    la = getattr(a, "labels", a)
    lb = getattr(b, "labels", b)
    if len(la) != len(lb):
        raise DataError(f"partitions differ in length ({len(la)} vs {len(lb)})")
    n = len(la)
    if n < 2:
        raise DataError("ARI needs at least two elements")
    table: dict = {}
    rows: dict = {}
    cols: dict = {}
    for x, y in zip(la, lb):
        table[(x, y)] = table.get((x, y), 0) + 1
        rows[x] = rows.get(x, 0) + 1
        cols[y] = cols.get(y, 0) + 1
    index = sum(_comb2(v) for v in table.values())
    sum_a = sum(_comb2(v) for v in rows.values())
    sum_b = sum(_comb2(v) for v in cols.values())
    total = _comb2(n)
    # exact integer arithmetic: ARI = (index - sa*sb/T) / ((sa+sb)/2 - sa*sb/T)
    num = 2 * (index * total - sum_a * sum_b)
    den = (sum_a + sum_b) * total - 2 * sum_a * sum_b
    if den == 0:
        same = len(table) == len(rows) == len(cols)
        return 1.0 if same else 0.0
    return num / den


def evaluate_ari_percent(pred: Partition, truth: Partition) -> float:
    return 100.0 * adjusted_rand_index(pred, truth)


def ground_truth_partition(ds: GraphDataset, params: DbscanParams, threads: int = 1,
                           gh: DistanceMatrix | None = None) -> Partition:
    if gh is None:
        gh = pairwise_gh_matrix(ds, threads=threads)
    return dbscan(gh, params)


def cluster_embeddings(emb: EmbeddingMatrix, params: DbscanParams) -> Partition:
    return dbscan(euclidean_distance_matrix(emb), params)


def distance_rank_correlation(D1: DistanceMatrix, D2: DistanceMatrix) -> float:
    """Spearman correlation of the upper-triangle entries (average ranks for ties)."""
    if D1.size != D2.size:
        raise DataError("distance matrices differ in size")
    if D1.size < 3:
        raise DataError("rank correlation needs at least three graphs")
    r1 = rankdata(D1.off_diagonal())
    r2 = rankdata(D2.off_diagonal())
    r1 -= r1.mean()
    r2 -= r2.mean()
    denom = math.sqrt(float(r1 @ r1) * float(r2 @ r2))
    if denom == 0:
        raise DataError("rank correlation undefined for constant distances")
    return float(np.clip(r1 @ r2 / denom, -1.0, 1.0))


# --------------------------------------------------------------------------
# files

def write_partition(ids, partition: Partition, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("graph_id\tlabel\n")
        for gid, lab in zip(ids, partition.labels):
            fh.write(f"{gid}\t{lab}\n")


def read_partition(path):
    ids, labels = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split("\t")
            if lineno == 1 and parts[0] == "graph_id":
                continue
            if parts == [""]:
                continue
            if len(parts) != 2:
                raise ParseError("expected '<graph_id>\\t<label>'", lineno)
            ids.append(parts[0])
            labels.append(int(parts[1]))
    return ids, Partition.from_labels(labels)


def write_report(rows, path) -> None:
    """``rows`` is an iterable of ``(method, ari_percent)``."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("method\tari_percent\n")
        for method, ari in rows:
            fh.write(f"{method}\t{ari:.4f}\n")
