"""Shared run machinery: dataset construction, run directories, train + eval.

A run directory holds config.json, manifest.json (config hash, code version,
seeds), times.json (wall-clock, kept separate so everything else is
byte-identical across reruns), and one subdirectory per seed with the loss
log and checkpoints. Evaluation appends rows to scores.csv at the root.
"""

from __future__ import annotations

import csv
import json
import time
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .checkpoint import load_checkpoint, save_checkpoint
from .config import ExperimentConfig, config_hash, config_to_dict, save_config
from .datasets import FactorDataset, FactorSpec, add_noise_background, generate_sprites
from .metrics import score_representation
from .networks import ModelSpecs, model_specs
from .objectives import HyperParams
from .rng import STREAM_METRICS, STREAM_TRAVERSE, RngState
from .training import ModelHandle, TrainConfig, train

LOSS_COLUMNS = ("iter", "reconstruction", "tc", "dimwise_kl", "index_code_mi", "total", "disc_loss")
SCORE_COLUMNS = ("model", "objective", "beta", "gamma", "seed", "mse", "mig", "factor_vae", "sap")


def make_dataset(cfg: ExperimentConfig) -> FactorDataset:
    spec = FactorSpec(tuple(n for n, _ in cfg.dataset.factors), tuple(c for _, c in cfg.dataset.factors))
    ds = generate_sprites(spec, cfg.dataset.resolution, cfg.dataset.seed)
    if cfg.dataset.noisy:
        ds = add_noise_background(ds, RngState(cfg.dataset.seed, 99))
    return ds


def specs_for(cfg: ExperimentConfig) -> ModelSpecs:
    channels = 3 if cfg.dataset.noisy else 1
    return model_specs(cfg.dataset.resolution, channels, cfg.latent_dim, reduced_disc=cfg.reduced_disc)


def train_config_for(cfg: ExperimentConfig, seed: int, dataset: FactorDataset) -> TrainConfig:
    return TrainConfig(
        objective=cfg.objective,
        hyper=HyperParams(beta=cfg.beta, gamma=cfg.gamma, lambda_=cfg.lambda_, alpha=cfg.alpha),
        batch_size=cfg.batch_size,
        iterations=cfg.iterations,
        latent_dim=cfg.latent_dim,
        seed=seed,
        adam=cfg.optimizer,
        disc_adam=cfg.disc_optimizer,
        dataset_size=cfg.dataset_size or dataset.size,
        checkpoint_every=cfg.checkpoint_every,
        dtype=cfg.dtype,
        reduced_disc=cfg.reduced_disc,
    )


def default_run_name(cfg: ExperimentConfig) -> str:
    return cfg.run_name or f"{cfg.objective}_b{cfg.beta:g}_g{cfg.gamma:g}"


def _write_loss_log(path, loss_log) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(LOSS_COLUMNS)
        for row in loss_log:
            writer.writerow([row["iter"]] + [repr(float(row[c])) for c in LOSS_COLUMNS[1:]])


def run_training(cfg: ExperimentConfig, out_root: Optional[str] = None, dataset: Optional[FactorDataset] = None, resume: bool = True) -> Path:
    """Train every seed of the experiment; returns the run directory.

    With ``resume`` (default), seeds whose final checkpoint already exists
    under an identical config hash are skipped; determinism makes the
    skipped work byte-identical to a rerun, so interrupted sweeps continue
    where they stopped.
    """
    root = Path(out_root or cfg.output_dir)
    run_dir = root / default_run_name(cfg)
    run_dir.mkdir(parents=True, exist_ok=True)
    t_start = time.time()
    manifest_path = run_dir / "manifest.json"
    same_config = False
    if resume and manifest_path.exists():
        try:
            with open(manifest_path) as f:
                same_config = json.load(f).get("config_hash") == config_hash(cfg)
        except (json.JSONDecodeError, OSError):
            same_config = False
    save_config(cfg, run_dir / "config.json")
    with open(manifest_path, "w") as f:
        json.dump(
            {"config_hash": config_hash(cfg), "code_version": __version__, "seeds": list(cfg.seeds)},
            f,
            indent=2,
            sort_keys=True,
        )
        f.write("\n")
    specs = specs_for(cfg)
    for seed in cfg.seeds:
        seed_dir = run_dir / f"seed{seed}"
        if same_config and (seed_dir / "checkpoint_final.tcwl").exists() and (seed_dir / "loss_log.csv").exists():
            continue
        if dataset is None:
            dataset = make_dataset(cfg)
        seed_dir.mkdir(exist_ok=True)

        def sink(iteration, params, _dir=seed_dir):
            save_checkpoint(_dir / f"checkpoint_{iteration:06d}.tcwl", params)

        run = train(train_config_for(cfg, seed, dataset), dataset, specs=specs, checkpoint_sink=sink)
        _write_loss_log(seed_dir / "loss_log.csv", run.loss_log)
        save_checkpoint(seed_dir / "checkpoint_final.tcwl", run.params)
    with open(run_dir / "times.json", "w") as f:
        json.dump({"started_unix": t_start, "finished_unix": time.time()}, f, indent=2)
        f.write("\n")
    return run_dir


def load_handle(run_dir, seed: int, cfg: Optional[ExperimentConfig] = None) -> ModelHandle:
    from .config import load_config

    run_dir = Path(run_dir)
    cfg = cfg or load_config(run_dir / "config.json")
    ckpt = run_dir / f"seed{seed}" / "checkpoint_final.tcwl"
    if not ckpt.exists():
        raise FileNotFoundError(f"missing checkpoint {ckpt}")
    return ModelHandle(specs_for(cfg), load_checkpoint(ckpt))


def run_eval(run_dir, dataset: Optional[FactorDataset] = None) -> list:
    """Score every seed's final checkpoint; appends rows to scores.csv."""
    from .config import load_config

    run_dir = Path(run_dir)
    cfg = load_config(run_dir / "config.json")
    if dataset is None:
        dataset = make_dataset(cfg)
    rows = []
    for seed in cfg.seeds:
        handle = load_handle(run_dir, seed, cfg)
        report = score_representation(
            handle.encode_mean, handle.decode_mean, dataset, RngState(seed, STREAM_METRICS)
        )
        rows.append(
            {
                "model": run_dir.name,
                "objective": cfg.objective,
                "beta": cfg.beta,
                "gamma": cfg.gamma,
                "seed": seed,
                "mse": report.mse,
                "mig": report.mig,
                "factor_vae": report.factor_vae,
                "sap": report.sap,
            }
        )
    scores_path = run_dir / "scores.csv"
    new_file = not scores_path.exists()
    with open(scores_path, "a", newline="") as f:
        writer = csv.writer(f)
        if new_file:
            writer.writerow(SCORE_COLUMNS)
        for row in rows:
            writer.writerow(
                [row["model"], row["objective"], repr(float(row["beta"])), repr(float(row["gamma"])), row["seed"]]
                + [repr(float(row[c])) for c in ("mse", "mig", "factor_vae", "sap")]
            )
    return rows


def run_traverse(run_dir, steps: int = 8, value_range=(-4.0, 4.0), rows: int = 4) -> list:
    from .config import load_config
    from .traversal import emit_traversals

    run_dir = Path(run_dir)
    cfg = load_config(run_dir / "config.json")
    dataset = make_dataset(cfg)
    out = []
    for seed in cfg.seeds:
        handle = load_handle(run_dir, seed, cfg)
        out.extend(
            emit_traversals(
                run_dir / f"seed{seed}" / "traversals",
                handle,
                dataset,
                RngState(seed, STREAM_TRAVERSE),
                steps=steps,
                value_range=value_range,
                rows=rows,
            )
        )
    return out
