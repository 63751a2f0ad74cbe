"""Grid discretization of path points into hot-cell tokens, and the
proximity weights between cells used by the reconstruction loss."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError, ParseError


@dataclass(frozen=True)
class Grid:
    min_x: float
    min_y: float
    cell_size: float
    cols: int
    rows: int

    def __post_init__(self):
        if not self.cell_size > 0:
            raise ConfigError("cell_size must be positive")
        if self.cols < 1 or self.rows < 1:
            raise ConfigError("grid needs at least one column and row")

    def cells_of(self, points) -> np.ndarray:
        """Vectorized :func:`cell_of`; returns an ``(N, 2)`` int array of ``(col, row)``."""
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        col = np.floor((pts[:, 0] - self.min_x) / self.cell_size)
        row = np.floor((pts[:, 1] - self.min_y) / self.cell_size)
        col = np.clip(col, 0, self.cols - 1).astype(np.int64)
        row = np.clip(row, 0, self.rows - 1).astype(np.int64)
        return np.column_stack([col, row])

    def centroid(self, col, row):
        return (self.min_x + (col + 0.5) * self.cell_size,
                self.min_y + (row + 0.5) * self.cell_size)


def cell_of(point, grid: Grid) -> tuple[int, int]:
    """Half-open cell ``[a, b)`` containing ``point``; outside points clamp to the border."""
    col, row = grid.cells_of([point])[0]
    return int(col), int(row)


@dataclass(frozen=True)
class TokenSequence:
    tokens: np.ndarray
    source_graph_id: str = ""

    def __post_init__(self):
        tokens = np.asarray(self.tokens, dtype=np.int64)
        if tokens.ndim != 1 or len(tokens) < 1:
            raise DataError("token sequence must be a non-empty 1-d sequence")
        object.__setattr__(self, "tokens", tokens)

    def __len__(self):
        return len(self.tokens)

    def __eq__(self, other):
        if not isinstance(other, TokenSequence):
            return NotImplemented
        return self.source_graph_id == other.source_graph_id and np.array_equal(self.tokens, other.tokens)


class Vocabulary:
    """Hot cells of a grid, numbered densely in ``(row, col)`` order."""

    def __init__(self, grid: Grid, hot_cells: Sequence[tuple[int, int]], min_hits: int):
        hot_cells = [tuple(int(v) for v in c) for c in hot_cells]
        if not hot_cells:
            raise ConfigError("vocabulary needs at least one hot cell")
        if len(set(hot_cells)) != len(hot_cells):
            raise DataError("duplicate hot cell")
        for c, r in hot_cells:
            if not (0 <= c < grid.cols and 0 <= r < grid.rows):
                raise DataError(f"hot cell ({c}, {r}) outside the grid")
        self.grid = grid
        self.hot_cells = tuple(hot_cells)
        self.min_hits = int(min_hits)
        self.token_of_cell = {cell: t for t, cell in enumerate(self.hot_cells)}
        cells = np.array(self.hot_cells, dtype=np.float64)
        self.centroids = np.column_stack([grid.min_x + (cells[:, 0] + 0.5) * grid.cell_size,
                                          grid.min_y + (cells[:, 1] + 0.5) * grid.cell_size])
        self.centroids.setflags(write=False)
        self._lookup = self._build_lookup()

    def __len__(self):
        return len(self.hot_cells)

    def __eq__(self, other):
        if not isinstance(other, Vocabulary):
            return NotImplemented
        return (self.grid == other.grid and self.hot_cells == other.hot_cells
                and self.min_hits == other.min_hits)

    def _build_lookup(self) -> np.ndarray:
        # token for every grid cell: its own token if hot, else the hot cell whose
        # centroid is nearest to this cell's centroid (argmin picks the smallest token on ties)
        g = self.grid
        table = np.empty((g.rows, g.cols), dtype=np.int64)
        hot_c = self.centroids
        cols = np.arange(g.cols)
        chunk = max(1, 2_000_000 // (g.cols * len(self)))
        for r0 in range(0, g.rows, chunk):
            rows = np.arange(r0, min(g.rows, r0 + chunk))
            cc, rr = np.meshgrid(cols, rows)
            cx = g.min_x + (cc.ravel() + 0.5) * g.cell_size
            cy = g.min_y + (rr.ravel() + 0.5) * g.cell_size
            dx = cx[:, None] - hot_c[None, :, 0]
            dy = cy[:, None] - hot_c[None, :, 1]
            table[rows[0]:rows[-1] + 1] = np.argmin(dx * dx + dy * dy, axis=1).reshape(len(rows), g.cols)
        for t, (c, r) in enumerate(self.hot_cells):
            table[r, c] = t
        table.setflags(write=False)
        return table

    def tokens_of_points(self, points) -> np.ndarray:
        cells = self.grid.cells_of(points)
        return self._lookup[cells[:, 1], cells[:, 0]]


def build_vocabulary(paths, cell_size: float, min_hits: int = 5) -> Vocabulary:
    """Grid over the bounding box of all path points (one cell of margin on each
    side); cells hit by at least ``min_hits`` points become tokens."""
    if not paths:
        raise DataError("cannot build a vocabulary from zero paths")
    if not cell_size > 0:
        raise ConfigError("cell_size must be positive")
    if min_hits < 1:
        raise ConfigError("min_hits must be >= 1")
    points = np.concatenate([np.asarray(p.coords, dtype=np.float64) for p in paths])
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    min_x, min_y = lo - cell_size
    cols = int(math.floor((hi[0] - min_x) / cell_size)) + 2
    rows = int(math.floor((hi[1] - min_y) / cell_size)) + 2
    grid = Grid(float(min_x), float(min_y), float(cell_size), cols, rows)
    cells = grid.cells_of(points)
    hits = np.zeros((rows, cols), dtype=np.int64)
    np.add.at(hits, (cells[:, 1], cells[:, 0]), 1)
    rr, cc = np.nonzero(hits >= min_hits)  # row-major, i.e. ordered by (row, col)
    if len(rr) == 0:
        raise ConfigError(f"no cell reaches min_hits={min_hits} (max hits {hits.max()}); "
                          "lower min_hits or enlarge cell_size")
    return Vocabulary(grid, list(zip(cc.tolist(), rr.tolist())), min_hits)


def hit_counts(paths, grid: Grid) -> dict[tuple[int, int], int]:
    counts: dict[tuple[int, int], int] = {}
    for p in paths:
        for c, r in grid.cells_of(p.coords):
            counts[(int(c), int(r))] = counts.get((int(c), int(r)), 0) + 1
    return counts


def tokenize_points(coords, vocab: Vocabulary, source_graph_id: str = "") -> TokenSequence:
    return TokenSequence(vocab.tokens_of_points(coords), source_graph_id)


def tokenize_path(p, vocab: Vocabulary) -> TokenSequence:
    """One token per path step: the step's cell if hot, else the nearest hot cell."""
    return tokenize_points(p.coords, vocab, p.source_graph_id)


# --------------------------------------------------------------------------
# proximity weights

def proximity_weight_row(target: int, vocab: Vocabulary) -> np.ndarray:
    """Softmax of negative centroid distances to ``target`` over all hot cells."""
    if not 0 <= target < len(vocab):
        raise DataError(f"token {target} outside vocabulary of size {len(vocab)}")
    return _weight_rows(vocab.centroids, np.array([target]))[0]


def _weight_rows(centroids: np.ndarray, targets: np.ndarray, top_k: int | None = None) -> np.ndarray:
    diff = centroids[targets][:, None, :] - centroids[None, :, :]
    dist = np.sqrt((diff * diff).sum(-1))
    # target's own distance is 0, so exp(-dist) <= 1 and no overflow is possible
    w = np.exp(-dist)
    if top_k is not None and top_k < w.shape[1]:
        cutoff = np.partition(w, -top_k, axis=1)[:, -top_k][:, None]
        w = np.where(w >= cutoff, w, 0.0)
    return w / w.sum(axis=1, keepdims=True)


class ProximityWeights:
    """Row provider for the loss: ``rows(tokens)`` gives one target distribution per token.

    The full ``|C| x |C|`` matrix is cached when ``|C| <= dense_limit``; larger
    vocabularies compute rows on demand. ``top_k`` keeps only the ``k`` largest
    weights per row (renormalized).
    """

    def __init__(self, vocab: Vocabulary, top_k: int | None = None, dense_limit: int = 4096):
        self.vocab_size = len(vocab)
        self._centroids = vocab.centroids
        self.top_k = top_k
        self.matrix = None
        if self.vocab_size <= dense_limit:
            self.matrix = _weight_rows(self._centroids, np.arange(self.vocab_size), top_k)

    def rows(self, tokens) -> np.ndarray:
        tokens = np.asarray(tokens, dtype=np.int64)
        if self.matrix is not None:
            return self.matrix[tokens]
        flat = tokens.ravel()
        return _weight_rows(self._centroids, flat, self.top_k).reshape(*tokens.shape, self.vocab_size)


class OneHotWeights:
    """Plain cross-entropy targets: all weight on the true token."""

    def __init__(self, vocab_size: int):
        self.vocab_size = int(vocab_size)

    def rows(self, tokens) -> np.ndarray:
        tokens = np.asarray(tokens, dtype=np.int64)
        out = np.zeros(tokens.shape + (self.vocab_size,))
        np.put_along_axis(out, tokens[..., None], 1.0, axis=-1)
        return out


# --------------------------------------------------------------------------
# vocabulary file

def write_vocabulary(vocab: Vocabulary, path) -> None:
    g = vocab.grid
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"grid {g.min_x!r} {g.min_y!r} {g.cell_size!r} {g.cols} {g.rows} {vocab.min_hits}\n")
        for t, (c, r) in enumerate(vocab.hot_cells):
            fh.write(f"cell {t} {c} {r}\n")


def read_vocabulary(path) -> Vocabulary:
    grid = None
    min_hits = 1
    cells = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            parts = raw.split()
            if not parts:
                continue
            try:
                if parts[0] == "grid" and len(parts) == 7:
                    grid = Grid(float(parts[1]), float(parts[2]), float(parts[3]),
                                int(parts[4]), int(parts[5]))
                    min_hits = int(parts[6])
                elif parts[0] == "cell" and len(parts) == 4:
                    cells[int(parts[1])] = (int(parts[2]), int(parts[3]))
                else:
                    raise ParseError(f"unrecognized record {raw.strip()!r}", lineno)
            except ValueError:
                raise ParseError(f"malformed record {raw.strip()!r}", lineno) from None
    if grid is None:
        raise ParseError("missing grid header")
    if sorted(cells) != list(range(len(cells))):
        raise ParseError("cell tokens must be dense 0..|C|-1")
    return Vocabulary(grid, [cells[t] for t in range(len(cells))], min_hits)
