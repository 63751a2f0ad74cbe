"""Graph embeddings: the mean encoder representation of a graph's clean walks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, ParseError
from .graph import GraphDataset
from .seq2seq import ModelParams, encode
from .tokenizer import Vocabulary, tokenize_path

LATENTS = ("hidden", "hidden_cell")


@dataclass(frozen=True)
class EmbeddingMatrix:
    graph_ids: tuple[str, ...]
    vectors: np.ndarray

    def __post_init__(self):
        vectors = np.asarray(self.vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] != len(self.graph_ids):
            raise DataError("embedding matrix needs one row per graph id")
        if not np.all(np.isfinite(vectors)):
            raise DataError("embedding matrix contains non-finite values")
        object.__setattr__(self, "graph_ids", tuple(self.graph_ids))
        object.__setattr__(self, "vectors", vectors)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self):
        return len(self.graph_ids)


def embed_path(params: ModelParams, tokens, latent: str = "hidden") -> np.ndarray:
    """Final encoder hidden state of the sequence (``hidden_cell`` appends the cell state)."""
    final, _ = encode(params, tokens)
    if latent == "hidden":
        return final.hidden
    if latent == "hidden_cell":
        return np.concatenate([final.hidden, final.cell])
    raise DataError(f"unknown latent {latent!r}; expected one of {LATENTS}")


def embed_graph(params: ModelParams, vocab: Vocabulary, paths, latent: str = "hidden") -> np.ndarray:
    if len(paths) == 0:
        raise DataError("cannot embed a graph without paths")
    vecs = np.stack([embed_path(params, tokenize_path(p, vocab), latent) for p in paths])
    return vecs.sum(axis=0) / len(paths)


def embed_dataset(params: ModelParams, vocab: Vocabulary, ds: GraphDataset, cfg,
                  latent: str = "hidden") -> EmbeddingMatrix:
    """Embed every graph from its training-time clean walks (``cfg`` is the ``TrainConfig``)."""
    from .trainer import clean_paths

    rows = [embed_graph(params, vocab, paths, latent) for paths in clean_paths(ds, cfg)]
    return EmbeddingMatrix(ds.ids, np.stack(rows))


def write_embeddings(emb: EmbeddingMatrix, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("id\t" + "\t".join(f"dim_{k}" for k in range(emb.dim)) + "\n")
        for gid, row in zip(emb.graph_ids, emb.vectors):
            fh.write(gid + "\t" + "\t".join(f"{v:.17g}" for v in row) + "\n")


def read_embeddings(path) -> EmbeddingMatrix:
    ids, rows = [], []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if not header or header[0] != "id":
            raise ParseError(f"{path}: embedding file must start with an 'id' header")
        for lineno, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split("\t")
            if parts == [""]:
                continue
            if len(parts) != len(header):
                raise ParseError(f"expected {len(header)} columns, got {len(parts)}", lineno)
            ids.append(parts[0])
            rows.append([float(v) for v in parts[1:]])
    return EmbeddingMatrix(ids, np.array(rows, dtype=np.float64).reshape(len(ids), len(header) - 1))
