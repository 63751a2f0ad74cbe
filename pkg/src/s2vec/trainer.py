"""Denoising training loop: fixed clean walks, per-epoch corruption, minibatch
SGD and validation-based early stopping."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import seq2seq
from .errors import ConfigError, DataError, TrainingError
from .graph import GraphDataset
from .sampler import SamplerConfig, SamplingStats, gaussian_displacements, sample_path_set
from .tokenizer import OneHotWeights, ProximityWeights, Vocabulary, build_vocabulary

log = logging.getLogger(__name__)

MODES = ("s2vec", "vanilla")

# RNG stream tags, combined with (seed, epoch) into a SeedSequence
_SPLIT, _TRAIN_NOISE, _SHUFFLE, _VAL_NOISE = 1, 2, 3, 4


def _rng(*key) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(list(key)))


@dataclass(frozen=True)
class TrainConfig:
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    cell_size: float | None = None     # None: about 100 cells over the bounding box
    min_hits: int = 5
    noise_magnitude: float = 1.0
    d_emb: int = 64
    n: int = 128
    lr: float = 0.05
    clip_norm: float = 5.0
    batch_size: int = 32
    max_epochs: int = 50
    patience: int = 5
    min_improvement: float = 1e-6
    validation_fraction: float = 0.1
    seed: int = 0
    mode: str = "s2vec"
    projection_bias: bool = True
    top_k: int | None = None
    resample_walks: bool = False       # fresh walks every epoch instead of one fixed set
    smoothing_window: int = 3          # validation smoothing when resample_walks is on

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.patience < 1:
            raise ConfigError("patience must be >= 1")
        if self.max_epochs < 1:
            raise ConfigError("max_epochs must be >= 1")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ConfigError("validation_fraction must lie in (0, 1)")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.noise_magnitude < 0:
            raise ConfigError("noise_magnitude must be non-negative")
        if not self.lr > 0:
            raise ConfigError("lr must be positive")
        if self.cell_size is not None and not self.cell_size > 0:
            raise ConfigError("cell_size must be positive")

    @property
    def effective_noise(self) -> float:
        return 0.0 if self.mode == "vanilla" else self.noise_magnitude


@dataclass
class TrainReport:
    train_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    best_epoch: int = 0
    best_val_loss: float = math.inf
    stop_reason: str = ""
    isolated_starts: int = 0
    vocab_size: int = 0
    cell_size: float = 0.0

    @property
    def epochs_run(self) -> int:
        return len(self.train_losses)

    def log_tsv(self) -> str:
        lines = ["epoch\ttrain_loss\tval_loss"]
        lines += [f"{e}\t{tr!r}\t{va!r}" for e, (tr, va)
                  in enumerate(zip(self.train_losses, self.val_losses), start=1)]
        return "\n".join(lines) + "\n"


class EarlyStopping:
    """Tracks the best validation loss; ``update`` returns True when training should stop."""

    def __init__(self, patience: int, min_improvement: float = 1e-6):
        self.patience = patience
        self.min_improvement = min_improvement
        self.best = math.inf
        self.best_epoch = 0
        self.stale = 0

    def update(self, epoch: int, loss: float) -> bool:
        if loss < self.best - self.min_improvement:
            self.best = loss
            self.best_epoch = epoch
            self.stale = 0
            return False
        self.stale += 1
        return self.stale >= self.patience


def split_train_validation(pairs, fraction: float, seed: int):
    """Hold out ``round(fraction * len(pairs))`` (at least one) pairs for validation.

    ``pairs`` are ``(graph_index, walk_index)`` tuples. The shuffle is seeded.
    Stratified by graph: a graph's last remaining pair is never moved to
    validation while another graph can still give one up.
    """
    if not 0.0 < fraction < 1.0:
        raise ConfigError("validation fraction must lie in (0, 1)")
    pairs = list(pairs)
    n_val = max(1, int(round(fraction * len(pairs))))
    if len(pairs) < 2 or n_val >= len(pairs):
        raise ConfigError(f"too few pairs ({len(pairs)}) for a validation fraction of {fraction}")
    order = _rng(seed, _SPLIT).permutation(len(pairs))
    remaining: dict = {}
    for g, _ in pairs:
        remaining[g] = remaining.get(g, 0) + 1
    val_idx = []
    for i in order:
        if len(val_idx) == n_val:
            break
        g = pairs[i][0]
        if remaining[g] > 1:
            remaining[g] -= 1
            val_idx.append(i)
    # fallback when graphs have a single path each: take any pairs in shuffled order
    chosen = set(val_idx)
    for i in order:
        if len(val_idx) == n_val:
            break
        if i not in chosen:
            val_idx.append(i)
            chosen.add(i)
    val_set = set(val_idx)
    train = [pairs[i] for i in range(len(pairs)) if i not in val_set]
    val = [pairs[i] for i in sorted(val_set)]
    return train, val


def auto_cell_size(points: np.ndarray, target_cells: int = 100) -> float:
    span = points.max(axis=0) - points.min(axis=0)
    area = float(span[0] * span[1])
    if area > 0:
        return math.sqrt(area / target_cells)
    longest = float(span.max())
    return longest / math.sqrt(target_cells) if longest > 0 else 1.0


class _Corpus:
    """Clean walks of every graph as node-index arrays plus their fixed clean tokens."""

    def __init__(self, ds: GraphDataset, sampler_cfg: SamplerConfig, vocab: Vocabulary | None = None,
                 cell_size: float | None = None, min_hits: int = 5):
        self.ds = ds
        self.stats = SamplingStats()
        self.paths = [sample_path_set(g, sampler_cfg, gid, self.stats) for g, gid in zip(ds.graphs, ds.ids)]
        if vocab is None:
            if cell_size is None:
                cell_size = auto_cell_size(np.concatenate([p.coords for ps in self.paths for p in ps]))
            vocab = build_vocabulary([p for ps in self.paths for p in ps], cell_size, min_hits)
        self.vocab = vocab
        self.index = [np.stack([[g.index_of(int(v)) for v in p.node_ids] for p in ps])
                      for g, ps in zip(ds.graphs, self.paths)]
        self.clean = [vocab.tokens_of_points(g.coords[idx]).reshape(idx.shape)
                      for g, idx in zip(ds.graphs, self.index)]

    def corrupted_tokens(self, noise: float, rng: np.random.Generator):
        if noise == 0:
            return self.clean
        out = []
        for g, idx in zip(self.ds.graphs, self.index):
            coords = g.coords + gaussian_displacements(g, noise, rng)
            out.append(self.vocab.tokens_of_points(coords[idx]).reshape(idx.shape))
        return out


def _batch(pairs, src_tokens, tgt_tokens):
    src = np.stack([src_tokens[g][w] for g, w in pairs])
    tgt = np.stack([tgt_tokens[g][w] for g, w in pairs])
    return src, tgt, np.ones(src.shape)


def _mean_loss(params, pairs, src_tokens, tgt_tokens, weights, batch_size):
    total = 0.0
    for start in range(0, len(pairs), batch_size):
        chunk = pairs[start:start + batch_size]
        loss, _ = seq2seq.batch_forward(params, *_batch(chunk, src_tokens, tgt_tokens), weights)
        total += loss * len(chunk)
    return total / len(pairs)


def train(ds: GraphDataset, cfg: TrainConfig, init: seq2seq.ModelParams | None = None):
    """Fit the encoder-decoder on ``ds``; returns ``(best params, vocabulary, report)``."""
    if len(ds) == 0:
        raise DataError("cannot train on an empty dataset")
    sampler_cfg = replace(cfg.sampler, seed=cfg.seed) if cfg.sampler.seed != cfg.seed else cfg.sampler
    corpus = _Corpus(ds, sampler_cfg, cell_size=cfg.cell_size, min_hits=cfg.min_hits)
    vocab = corpus.vocab
    report = TrainReport(isolated_starts=corpus.stats.isolated_starts, vocab_size=len(vocab),
                         cell_size=vocab.grid.cell_size)
    if corpus.stats.isolated_starts:
        log.warning("%d walks started on isolated nodes", corpus.stats.isolated_starts)
    if cfg.mode == "vanilla":
        weights = OneHotWeights(len(vocab))
    else:
        weights = ProximityWeights(vocab, top_k=cfg.top_k)
    noise = cfg.effective_noise

    pairs = [(g, w) for g in range(len(ds)) for w in range(sampler_cfg.num_walks_per_graph)]
    train_pairs, val_pairs = split_train_validation(pairs, cfg.validation_fraction, cfg.seed)

    params = init.copy() if init is not None else seq2seq.init_params(
        len(vocab), cfg.d_emb, cfg.n, seed=cfg.seed, projection_bias=cfg.projection_bias)
    best = params.copy()
    stopper = EarlyStopping(cfg.patience, cfg.min_improvement)
    raw_val: list[float] = []
    report.stop_reason = "max_epochs"

    for epoch in range(1, cfg.max_epochs + 1):
        if cfg.resample_walks and epoch > 1:
            corpus = _Corpus(ds, replace(sampler_cfg, seed=sampler_cfg.seed + epoch - 1), vocab=vocab)
        noisy = corpus.corrupted_tokens(noise, _rng(cfg.seed, _TRAIN_NOISE, epoch))
        order = _rng(cfg.seed, _SHUFFLE, epoch).permutation(len(train_pairs))
        shuffled = [train_pairs[i] for i in order]
        total = 0.0
        for start in range(0, len(shuffled), cfg.batch_size):
            chunk = shuffled[start:start + cfg.batch_size]
            loss, trace = seq2seq.batch_forward(params, *_batch(chunk, noisy, corpus.clean), weights)
            grads = seq2seq.backward(trace, params)
            params = seq2seq.sgd_step(params, grads, cfg.lr, cfg.clip_norm)
            total += loss * len(chunk)
        train_loss = total / len(shuffled)

        val_noisy = corpus.corrupted_tokens(noise, _rng(cfg.seed, _VAL_NOISE))
        val_loss = _mean_loss(params, val_pairs, val_noisy, corpus.clean, weights, cfg.batch_size)
        if not (math.isfinite(train_loss) and math.isfinite(val_loss)):
            report.stop_reason = "non-finite loss"
            raise TrainingError(f"non-finite loss at epoch {epoch}")
        raw_val.append(val_loss)
        if cfg.resample_walks:
            window = raw_val[-cfg.smoothing_window:]
            val_loss = sum(window) / len(window)
        report.train_losses.append(train_loss)
        report.val_losses.append(val_loss)
        log.info("epoch %d train %.6f val %.6f", epoch, train_loss, val_loss)

        stop = stopper.update(epoch, val_loss)
        if stopper.best_epoch == epoch:
            best = params.copy()
        if stop:
            report.stop_reason = f"no validation improvement for {cfg.patience} epochs"
            break

    report.best_epoch = stopper.best_epoch
    report.best_val_loss = stopper.best
    return best, vocab, report


def clean_paths(ds: GraphDataset, cfg: TrainConfig):
    """The training-time clean walks of every graph (recomputed deterministically)."""
    sampler_cfg = replace(cfg.sampler, seed=cfg.seed)
    return [sample_path_set(g, sampler_cfg, gid) for g, gid in zip(ds.graphs, ds.ids)]
