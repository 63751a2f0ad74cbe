"""PCA over sorted, zero-padded coordinate vectors."""

from __future__ import annotations

import logging
from typing import NamedTuple

import numpy as np

from .embedder import EmbeddingMatrix
from .errors import ConfigError, DataError
from .graph import GraphDataset, SpatialGraph

log = logging.getLogger(__name__)


def flatten_graph(g: SpatialGraph, v_max: int) -> np.ndarray:
    """``[x1, y1, x2, y2, ...]`` over nodes sorted by (x, y, id), zero-padded to ``2 * v_max``."""
    if len(g) > v_max:
        raise DataError(f"graph has {len(g)} nodes, more than v_max={v_max}")
    ordered = sorted(g.nodes, key=lambda n: (n.x, n.y, n.id))
    out = np.zeros(2 * v_max)
    for k, node in enumerate(ordered):
        out[2 * k] = node.x
        out[2 * k + 1] = node.y
    return out


def flatten_dataset(ds: GraphDataset) -> np.ndarray:
    v_max = max(len(g) for g in ds.graphs)
    return np.stack([flatten_graph(g, v_max) for g in ds.graphs])


class PCAResult(NamedTuple):
    projected: np.ndarray    # (rows, k)
    components: np.ndarray   # (k, cols), orthonormal rows
    mean: np.ndarray
    eigenvalues: np.ndarray  # descending sample-covariance eigenvalues of the kept components

    total_variance: float = 1.0

    @property
    def explained_variance_ratio(self) -> np.ndarray:
        return self.eigenvalues / self.total_variance


def pca_project(X, n_components: int) -> PCAResult:
    X = np.asarray(X, dtype=np.float64)
    rows, cols = X.shape
    if rows < 2:
        raise DataError("PCA needs at least two rows")
    if not 1 <= n_components <= min(rows, cols):
        raise ConfigError(f"n_components must lie in [1, {min(rows, cols)}], got {n_components}")
    mean = X.mean(axis=0)
    centered = X - mean
    cov = centered.T @ centered / (rows - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals, kind="stable")[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order].T
    total = float(evals.sum())

    comps = evecs[:n_components].copy()
    kept = evals[:n_components].copy()
    tol = max(rows, cols) * np.finfo(np.float64).eps * (evals[0] if len(evals) else 0.0)
    deficient = kept <= tol
    if np.any(deficient):
        log.warning("data rank %d is below n_components=%d; trailing components set to zero",
                    int((~deficient).sum()), n_components)
        comps[deficient] = 0.0
        kept[deficient] = 0.0
    for k in range(n_components):
        j = int(np.argmax(np.abs(comps[k])))
        if comps[k, j] < 0:
            comps[k] = -comps[k]
    return PCAResult(centered @ comps.T, comps, mean, kept, total if total > 0 else 1.0)


def clamp_components(ds: GraphDataset, n: int) -> int:
    """``n`` limited to ``min(rows, cols)`` of the flattened matrix, with a warning when it bites."""
    limit = min(len(ds), 2 * max(len(g) for g in ds.graphs))
    if n > limit:
        log.warning("PCA dimension %d exceeds min(rows, cols) = %d; using %d", n, limit, limit)
        return limit
    return n


def pca_baseline_embed(ds: GraphDataset, n: int) -> EmbeddingMatrix:
    X = flatten_dataset(ds)
    return EmbeddingMatrix(ds.ids, pca_project(X, n).projected)
