import numpy as np
import pytest

from s2vec.errors import ConfigError
from s2vec.sampler import SamplerConfig
from s2vec.seq2seq import forward_loss
from s2vec.synthetic import generate_synthetic_dataset
from s2vec.tokenizer import OneHotWeights
from s2vec.trainer import (EarlyStopping, TrainConfig, _Corpus, auto_cell_size, clean_paths,
                           split_train_validation, train)


@pytest.fixture(scope="module")
def small_ds():
    return generate_synthetic_dataset(2, 3, 6, 0.2, 8.0, 3.0, seed=1)


def small_cfg(**kw):
    base = dict(sampler=SamplerConfig(walk_length=6, num_walks_per_graph=4), cell_size=2.0, min_hits=1,
                d_emb=4, n=6, lr=0.1, batch_size=8, max_epochs=3, patience=2, seed=0)
    base.update(kw)
    return TrainConfig(**base)


def test_early_stopping_sequence():
    stop = EarlyStopping(patience=2)
    decisions = [stop.update(e, v) for e, v in enumerate([5.0, 4.0, 4.0, 3.0, 3.5, 3.2], start=1)]
    assert decisions == [False, False, False, False, False, True]
    assert stop.best == 3.0 and stop.best_epoch == 4


def test_early_stopping_min_improvement():
    stop = EarlyStopping(patience=1, min_improvement=1e-6)
    assert not stop.update(1, 1.0)
    assert stop.update(2, 1.0 - 1e-7)


def test_split_sizes_and_disjointness():
    pairs = [(g, w) for g in range(5) for w in range(2)]
    train_pairs, val_pairs = split_train_validation(pairs, 0.2, seed=0)
    assert len(train_pairs) == 8 and len(val_pairs) == 2
    assert sorted(train_pairs + val_pairs) == pairs


def test_split_keeps_every_graph_in_training():
    pairs = [(g, w) for g in range(10) for w in range(3)]
    for seed in range(20):
        train_pairs, val_pairs = split_train_validation(pairs, 0.5, seed)
        assert {g for g, _ in train_pairs} == set(range(10))
        assert len(val_pairs) == 15


def test_split_is_seeded():
    pairs = [(g, w) for g in range(6) for w in range(5)]
    assert split_train_validation(pairs, 0.3, 4) == split_train_validation(pairs, 0.3, 4)
    assert split_train_validation(pairs, 0.3, 4) != split_train_validation(pairs, 0.3, 5)


def test_split_rejects_degenerate_requests():
    with pytest.raises(ConfigError):
        split_train_validation([(0, 0)], 0.5, 0)
    with pytest.raises(ConfigError):
        split_train_validation([(0, 0), (0, 1)], 1.0, 0)


def test_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(mode="other")
    with pytest.raises(ConfigError):
        TrainConfig(patience=0)
    assert TrainConfig(mode="vanilla", noise_magnitude=2.0).effective_noise == 0.0


def test_auto_cell_size_targets_about_hundred_cells():
    pts = np.array([[0.0, 0.0], [20.0, 5.0]])
    assert auto_cell_size(pts) == pytest.approx(1.0)
    assert auto_cell_size(np.zeros((3, 2))) == 1.0


def test_single_cell_vocabulary_stops_after_patience(small_ds):
    params, vocab, report = train(small_ds, small_cfg(cell_size=1000.0, patience=1, max_epochs=10))
    assert len(vocab) == 1
    assert report.val_losses[0] == 0.0
    assert report.epochs_run == 2 and report.best_epoch == 1
    assert "no validation improvement" in report.stop_reason


def test_training_is_deterministic(small_ds):
    a = train(small_ds, small_cfg())
    b = train(small_ds, small_cfg())
    assert a[0].equals(b[0])
    assert a[1] == b[1]
    assert a[2].log_tsv() == b[2].log_tsv()
    c = train(small_ds, small_cfg(seed=1))
    assert not a[0].equals(c[0])


def test_returned_params_are_the_best_snapshot(small_ds):
    cfg = small_cfg(mode="vanilla", max_epochs=4, patience=4, lr=2.0)
    params, vocab, report = train(small_ds, cfg)
    assert report.best_val_loss == min(report.val_losses)
    corpus = _Corpus(small_ds, SamplerConfig(walk_length=6, num_walks_per_graph=4, seed=0), vocab=vocab)
    pairs = [(g, w) for g in range(len(small_ds)) for w in range(4)]
    _, val_pairs = split_train_validation(pairs, cfg.validation_fraction, cfg.seed)
    weights = OneHotWeights(len(vocab))
    losses = [forward_loss(params, corpus.clean[g][w], corpus.clean[g][w], weights)[0] for g, w in val_pairs]
    assert np.mean(losses) == pytest.approx(report.best_val_loss, rel=1e-12)


def test_vanilla_mode_trains_on_clean_inputs(small_ds):
    # with zero noise the corrupted tokens are the clean tokens themselves
    cfg = small_cfg(mode="vanilla", noise_magnitude=5.0)
    corpus = _Corpus(small_ds, cfg.sampler, cell_size=cfg.cell_size, min_hits=cfg.min_hits)
    noisy = corpus.corrupted_tokens(cfg.effective_noise, np.random.default_rng(0))
    assert all(np.array_equal(a, b) for a, b in zip(noisy, corpus.clean))
    corrupted = corpus.corrupted_tokens(5.0, np.random.default_rng(0))
    assert any(not np.array_equal(a, b) for a, b in zip(corrupted, corpus.clean))


def test_losses_recorded_per_epoch(small_ds):
    _, _, report = train(small_ds, small_cfg(max_epochs=3, patience=5))
    assert report.epochs_run == 3 and report.stop_reason == "max_epochs"
    assert len(report.log_tsv().splitlines()) == 4
    assert all(v >= 0 for v in report.train_losses + report.val_losses)


def test_training_loss_drops_on_smoke_dataset(small_ds):
    _, _, report = train(small_ds, small_cfg(max_epochs=5, patience=10, lr=0.5))
    assert report.train_losses[4] <= report.train_losses[0]


def test_resample_walks_mode_runs(small_ds):
    _, _, report = train(small_ds, small_cfg(resample_walks=True, max_epochs=3, patience=5))
    assert report.epochs_run == 3


def test_clean_paths_follow_training_seed(small_ds):
    cfg = small_cfg(seed=3)
    a = clean_paths(small_ds, cfg)
    corpus = _Corpus(small_ds, SamplerConfig(walk_length=6, num_walks_per_graph=4, seed=3), cell_size=2.0)
    assert all(x == y for ps, qs in zip(a, corpus.paths) for x, y in zip(ps, qs))
