"""Flat ``key = value`` configuration shared by every CLI subcommand."""

from __future__ import annotations

from .errors import ConfigError
from .sampler import SamplerConfig
from .trainer import TrainConfig


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional(kind):
    def convert(text: str):
        if text.strip().lower() in ("", "none", "auto"):
            return None
        return kind(text)
    return convert


# key -> (converter, default)
SCHEMA = {
    "seed": (int, 0),
    "threads": (int, 1),
    # synthetic generator
    "k_clusters": (int, 5),
    "per_cluster": (int, 20),
    "nodes_per_graph": (int, 15),
    "within_jitter": (float, 0.3),
    "center_spread": (float, 10.0),
    "edge_radius": (float, 3.0),
    "template_radius": (_optional(float), None),
    "region_size": (_optional(float), None),
    "template_size": (_optional(int), None),
    # sampler
    "walk_length": (int, 20),
    "num_walks_per_graph": (int, 10),
    "move_probability": (float, 0.8),
    "smoother": (float, 1.0),
    # tokenizer / model / training
    "cell_size": (_optional(float), None),
    "min_hits": (int, 5),
    "noise_magnitude": (float, 1.0),
    "d_emb": (int, 64),
    "n": (int, 128),
    "lr": (float, 0.05),
    "clip_norm": (float, 5.0),
    "batch_size": (int, 32),
    "max_epochs": (int, 50),
    "patience": (int, 5),
    "min_improvement": (float, 1e-6),
    "validation_fraction": (float, 0.1),
    "mode": (str, "s2vec"),
    "projection_bias": (_bool, True),
    "top_k": (_optional(int), None),
    "resample_walks": (_bool, False),
    "smoothing_window": (int, 3),
    "latent": (str, "hidden"),
    # baseline
    "baseline_n": (_optional(int), None),
    # clustering
    "eps": (_optional(float), None),
    "min_pts": (int, 3),
    "eps_percentile": (float, 15.0),
}


def defaults() -> dict:
    return {k: v for k, (_, v) in SCHEMA.items()}


def set_value(cfg: dict, key: str, text: str) -> None:
    key = key.strip()
    if key not in SCHEMA:
        raise ConfigError(f"unknown config key {key!r}")
    convert = SCHEMA[key][0]
    try:
        cfg[key] = convert(text.strip())
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {exc}") from None


def parse_config(text: str, base: dict | None = None) -> dict:
    cfg = defaults() if base is None else dict(base)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value")
        key, value = line.split("=", 1)
        set_value(cfg, key, value)
    return cfg


def load_config(path=None, overrides=(), base: dict | None = None) -> dict:
    cfg = defaults() if base is None else dict(base)
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                cfg = parse_config(fh.read(), cfg)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key=value")
        key, value = item.split("=", 1)
        set_value(cfg, key, value)
    return cfg


def dump_config(cfg: dict) -> str:
    lines = []
    for key in SCHEMA:
        value = cfg.get(key)
        lines.append(f"{key} = {'auto' if value is None else value}")
    return "\n".join(lines) + "\n"


def train_config(cfg: dict) -> TrainConfig:
    sampler = SamplerConfig(walk_length=cfg["walk_length"], num_walks_per_graph=cfg["num_walks_per_graph"],
                            move_probability=cfg["move_probability"], smoother=cfg["smoother"],
                            seed=cfg["seed"])
    return TrainConfig(
        sampler=sampler, cell_size=cfg["cell_size"], min_hits=cfg["min_hits"],
        noise_magnitude=cfg["noise_magnitude"], d_emb=cfg["d_emb"], n=cfg["n"], lr=cfg["lr"],
        clip_norm=cfg["clip_norm"], batch_size=cfg["batch_size"], max_epochs=cfg["max_epochs"],
        patience=cfg["patience"], min_improvement=cfg["min_improvement"],
        validation_fraction=cfg["validation_fraction"], seed=cfg["seed"], mode=cfg["mode"],
        projection_bias=cfg["projection_bias"], top_k=cfg["top_k"],
        resample_walks=cfg["resample_walks"], smoothing_window=cfg["smoothing_window"])


def generator_kwargs(cfg: dict) -> dict:
    keys = ("k_clusters", "per_cluster", "nodes_per_graph", "within_jitter", "center_spread",
            "edge_radius", "seed", "template_radius", "region_size", "template_size")
    return {k: cfg[k] for k in keys}
