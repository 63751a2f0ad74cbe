"""Command-line pipeline: gen, stats, train, embed, baseline, eval.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .baselines import clamp_components, pca_baseline_embed
from .cluster import (DbscanParams, Partition, cluster_embeddings, dbscan, distance_rank_correlation,
                      euclidean_distance_matrix, evaluate_ari_percent, write_partition, write_report)
from .config import generator_kwargs, load_config, train_config
from .embedder import embed_dataset, read_embeddings, write_embeddings
from .errors import DataError, S2VecError
from .graph import graph_stats, load_dataset, pairwise_gh_matrix, save_dataset, write_distance_matrix
from .seq2seq import load_params, save_params
from .synthetic import generate_synthetic_dataset
from .tokenizer import read_vocabulary, write_vocabulary
from .trainer import train

log = logging.getLogger("s2vec")

CHECKPOINT = "checkpoint.npz"
VOCAB = "vocab.txt"
TRAIN_LOG = "train_log.tsv"
MANIFEST = "manifest.json"


@dataclass
class RunManifest:
    command: str
    seed: int
    config: dict
    artifacts: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    version: str = __version__

    def write(self, directory: Path) -> Path:
        missing = [p for p in self.artifacts.values() if not (directory / p).exists()]
        if missing:
            raise DataError(f"manifest references missing artifacts {missing}")
        path = directory / MANIFEST
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def _config(args, base=None) -> dict:
    overrides = list(args.set or [])
    if getattr(args, "seed", None) is not None:
        overrides.append(f"seed={args.seed}")
    if getattr(args, "threads", None) is not None:
        overrides.append(f"threads={args.threads}")
    if getattr(args, "mode", None) is not None:
        overrides.append(f"mode={args.mode}")
    return load_config(args.config, overrides, base)


def _dbscan_params(cfg) -> DbscanParams:
    return DbscanParams(cfg["eps"], cfg["min_pts"], cfg["eps_percentile"])


def cmd_gen(args) -> int:
    cfg = _config(args)
    out = Path(args.out)
    ds = generate_synthetic_dataset(**generator_kwargs(cfg))
    written = save_dataset(ds, out)
    RunManifest("gen", cfg["seed"], cfg, {"labels": "labels.tsv"},
                {"graphs": len(ds)}).write(out)
    log.info("wrote %d graphs to %s", len(written) - 1, out)
    return 0


def cmd_stats(args) -> int:
    ds = load_dataset(args.dataset)
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        out.write("graph_id\tnodes\tedges\tavg_degree\tclustering_coefficient\n")
        for gid, g in zip(ds.ids, ds.graphs):
            s = graph_stats(g)
            out.write(f"{gid}\t{len(g)}\t{g.num_edges()}\t{s.avg_degree:.6g}\t{s.clustering_coefficient:.6g}\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_train(args) -> int:
    cfg = _config(args)
    tcfg = train_config(cfg)
    ds = load_dataset(args.dataset)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    params, vocab, report = train(ds, tcfg)
    save_params(params, out / CHECKPOINT)
    write_vocabulary(vocab, out / VOCAB)
    (out / TRAIN_LOG).write_text(report.log_tsv(), encoding="utf-8")
    RunManifest("train", cfg["seed"], cfg,
                {"checkpoint": CHECKPOINT, "vocabulary": VOCAB, "log": TRAIN_LOG},
                {"mode": tcfg.mode, "best_epoch": report.best_epoch,
                 "best_val_loss": report.best_val_loss, "epochs_run": report.epochs_run,
                 "stop_reason": report.stop_reason, "vocab_size": report.vocab_size,
                 "cell_size": report.cell_size, "isolated_starts": report.isolated_starts}).write(out)
    log.info("trained %s: %d epochs, best %d (val %.6f)", tcfg.mode, report.epochs_run,
             report.best_epoch, report.best_val_loss)
    return 0


def cmd_embed(args) -> int:
    model = Path(args.model)
    base = None
    if (model / MANIFEST).exists():
        base = json.loads((model / MANIFEST).read_text(encoding="utf-8"))["config"]
    cfg = _config(args, base)
    params = load_params(args.checkpoint or model / CHECKPOINT)
    vocab = read_vocabulary(args.vocab or model / VOCAB)
    ds = load_dataset(args.dataset)
    emb = embed_dataset(params, vocab, ds, train_config(cfg), latent=cfg["latent"])
    write_embeddings(emb, args.out)
    return 0


def cmd_baseline(args) -> int:
    cfg = _config(args)
    ds = load_dataset(args.dataset)
    n = args.n if args.n is not None else (cfg["baseline_n"] or cfg["n"])
    write_embeddings(pca_baseline_embed(ds, clamp_components(ds, n)), args.out)
    return 0


def _method_files(specs):
    out = []
    for spec in specs:
        if "=" in spec:
            name, path = spec.split("=", 1)
        else:
            name, path = Path(spec).stem, spec
        out.append((name, Path(path)))
    return out


def cmd_eval(args) -> int:
    cfg = _config(args)
    ds = load_dataset(args.dataset)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    params = _dbscan_params(cfg)
    gh = pairwise_gh_matrix(ds, threads=cfg["threads"])
    write_distance_matrix(gh, out / "gh_distances.tsv")
    truth = dbscan(gh, params)
    write_partition(ds.ids, truth, out / "partition_ground_truth.tsv")
    artifacts = {"gh_distances": "gh_distances.tsv", "ground_truth": "partition_ground_truth.tsv",
                 "report": "report.tsv", "rank_correlation": "rank_correlation.tsv"}
    rows, corr = [], []
    for name, path in _method_files(args.embeddings):
        emb = read_embeddings(path)
        if list(emb.graph_ids) != list(ds.ids):
            raise DataError(f"{path}: graph ids do not match the dataset order")
        part = cluster_embeddings(emb, params)
        write_partition(ds.ids, part, out / f"partition_{name}.tsv")
        artifacts[f"partition_{name}"] = f"partition_{name}.tsv"
        rows.append((name, evaluate_ari_percent(part, truth)))
        corr.append((name, distance_rank_correlation(gh, euclidean_distance_matrix(emb))))
    write_report(rows, out / "report.tsv")
    with open(out / "rank_correlation.tsv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("method\tspearman_vs_gh\n")
        for name, rho in corr:
            fh.write(f"{name}\t{rho:.6f}\n")
    extra = {"ground_truth_clusters": truth.num_clusters}
    if ds.labels is not None:
        extra["ground_truth_vs_generator_ari_percent"] = evaluate_ari_percent(
            truth, Partition.from_labels(ds.labels))
    RunManifest("eval", cfg["seed"], cfg, artifacts, extra).write(out)
    sys.stdout.write((out / "report.tsv").read_text(encoding="utf-8"))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key=value config file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int, help="worker cap; results do not depend on it")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="s2vec", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"s2vec {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="generate a labeled synthetic dataset")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("stats", parents=[common], help="per-graph degree and clustering statistics")
    p.add_argument("dataset")
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", parents=[common], help="train the denoising sequence autoencoder")
    p.add_argument("dataset")
    p.add_argument("--out", required=True, help="model directory")
    p.add_argument("--mode", choices=["s2vec", "vanilla"])
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("embed", parents=[common], help="embed every graph with a trained model")
    p.add_argument("model", help="model directory written by 'train'")
    p.add_argument("dataset")
    p.add_argument("--checkpoint")
    p.add_argument("--vocab")
    p.add_argument("--out", required=True, help="embedding TSV")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("baseline", parents=[common], help="PCA over sorted node coordinates")
    p.add_argument("dataset")
    p.add_argument("--method", choices=["pca"], default="pca")
    p.add_argument("--n", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("eval", parents=[common], help="ARI of each embedding against the GH ground truth")
    p.add_argument("dataset")
    p.add_argument("embeddings", nargs="+", metavar="[NAME=]EMBEDDINGS.tsv")
    p.add_argument("--out", required=True, help="evaluation directory")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except S2VecError as exc:
        print(f"s2vec {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"s2vec {args.command}: {exc}", file=sys.stderr)
        return DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())
