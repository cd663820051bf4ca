"""Experiment configuration: JSON in, validated dataclasses out.

Scientific knobs (objective, beta, gamma, seeds) have no defaults; a config
that omits them fails validation with a message naming the field. Parsing
then serializing then parsing yields an identical config.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Tuple

from .optim import DISC_ADAM, AdamConfig
from .training import OBJECTIVES


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"config field '{field_name}': {message}")


@dataclass(frozen=True)
class DatasetConfig:
    factors: Tuple[Tuple[str, int], ...] = (("shape", 3), ("orientation", 8), ("pos_x", 8), ("pos_y", 8))
    resolution: int = 64
    seed: int = 0
    noisy: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    objective: str
    beta: float
    gamma: float
    seeds: Tuple[int, ...]
    alpha: float = 1.0
    lambda_: float = 1.0
    batch_size: int = 100
    iterations: int = 15000
    latent_dim: int = 10
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    beta_grid: Tuple[float, ...] = ()
    gamma_grid: Tuple[float, ...] = ()
    output_dir: str = "runs"
    run_name: Optional[str] = None
    dtype: str = "f32"
    optimizer: AdamConfig = field(default_factory=AdamConfig)
    disc_optimizer: AdamConfig = DISC_ADAM
    checkpoint_every: int = 0
    dataset_size: Optional[int] = None
    reduced_disc: bool = False


_REQUIRED = ("objective", "beta", "gamma", "seeds")


def _require(raw: dict, name: str):
    if name not in raw:
        raise ConfigError(name, "missing (no default for scientific knobs)")
    return raw[name]


def parse_config(raw: dict) -> ExperimentConfig:
    objective = _require(raw, "objective")
    if objective not in OBJECTIVES:
        raise ConfigError("objective", f"must be one of {OBJECTIVES}")
    beta = float(_require(raw, "beta"))
    gamma = float(_require(raw, "gamma"))
    seeds = tuple(int(s) for s in _require(raw, "seeds"))
    if len(seeds) == 0:
        raise ConfigError("seeds", "must be non-empty")
    if len(set(seeds)) != len(seeds):
        raise ConfigError("seeds", "must be distinct")
    if beta < 0:
        raise ConfigError("beta", "must be >= 0")
    if gamma < 0:
        raise ConfigError("gamma", "must be >= 0")
    if objective == "wae_mmd" and "lambda" not in raw:
        raise ConfigError("lambda", "required for the wae_mmd objective")

    ds_raw = raw.get("dataset", {})
    try:
        dataset = DatasetConfig(
            factors=tuple((str(n), int(c)) for n, c in ds_raw.get("factors", DatasetConfig().factors)),
            resolution=int(ds_raw.get("resolution", 64)),
            seed=int(ds_raw.get("seed", 0)),
            noisy=bool(ds_raw.get("noisy", False)),
        )
    except (TypeError, ValueError) as e:
        raise ConfigError("dataset", str(e)) from e

    def _adam(key: str, default: AdamConfig) -> AdamConfig:
        sub = raw.get(key)
        if sub is None:
            return default
        try:
            return AdamConfig(
                learning_rate=float(sub.get("learning_rate", default.learning_rate)),
                beta1=float(sub.get("beta1", default.beta1)),
                beta2=float(sub.get("beta2", default.beta2)),
                epsilon=float(sub.get("epsilon", default.epsilon)),
            )
        except (TypeError, ValueError) as e:
            raise ConfigError(key, str(e)) from e

    cfg = ExperimentConfig(
        objective=objective,
        beta=beta,
        gamma=gamma,
        seeds=seeds,
        alpha=float(raw.get("alpha", 1.0)),
        lambda_=float(raw.get("lambda", 1.0)),
        batch_size=int(raw.get("batch_size", 100)),
        iterations=int(raw.get("iterations", 15000)),
        latent_dim=int(raw.get("latent_dim", 10)),
        dataset=dataset,
        beta_grid=tuple(float(b) for b in raw.get("beta_grid", ())),
        gamma_grid=tuple(float(g) for g in raw.get("gamma_grid", ())),
        output_dir=str(raw.get("output_dir", "runs")),
        run_name=raw.get("run_name"),
        dtype=str(raw.get("dtype", "f32")),
        optimizer=_adam("optimizer", AdamConfig()),
        disc_optimizer=_adam("disc_optimizer", DISC_ADAM),
        checkpoint_every=int(raw.get("checkpoint_every", 0)),
        dataset_size=None if raw.get("dataset_size") is None else int(raw["dataset_size"]),
        reduced_disc=bool(raw.get("reduced_disc", False)),
    )
    if cfg.batch_size < 2:
        raise ConfigError("batch_size", "must be >= 2")
    if cfg.iterations < 1:
        raise ConfigError("iterations", "must be >= 1")
    if cfg.latent_dim < 1:
        raise ConfigError("latent_dim", "must be >= 1")
    if cfg.dtype not in ("f32", "f64"):
        raise ConfigError("dtype", "must be f32 or f64")
    return cfg


def config_to_dict(cfg: ExperimentConfig) -> dict:
    out = {
        "objective": cfg.objective,
        "beta": cfg.beta,
        "gamma": cfg.gamma,
        "seeds": list(cfg.seeds),
        "alpha": cfg.alpha,
        "lambda": cfg.lambda_,
        "batch_size": cfg.batch_size,
        "iterations": cfg.iterations,
        "latent_dim": cfg.latent_dim,
        "dataset": {
            "factors": [list(f) for f in cfg.dataset.factors],
            "resolution": cfg.dataset.resolution,
            "seed": cfg.dataset.seed,
            "noisy": cfg.dataset.noisy,
        },
        "beta_grid": list(cfg.beta_grid),
        "gamma_grid": list(cfg.gamma_grid),
        "output_dir": cfg.output_dir,
        "run_name": cfg.run_name,
        "dtype": cfg.dtype,
        "optimizer": asdict(cfg.optimizer),
        "disc_optimizer": asdict(cfg.disc_optimizer),
        "checkpoint_every": cfg.checkpoint_every,
        "dataset_size": cfg.dataset_size,
        "reduced_disc": cfg.reduced_disc,
    }
    return out


def load_config(path) -> ExperimentConfig:
    with open(path) as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError("<file>", f"invalid JSON: {e}") from e
    return parse_config(raw)


def save_config(cfg: ExperimentConfig, path) -> None:
    with open(path, "w") as f:
        json.dump(config_to_dict(cfg), f, indent=2, sort_keys=True)
        f.write("\n")


def config_hash(cfg: ExperimentConfig) -> str:
    canonical = json.dumps(config_to_dict(cfg), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]
