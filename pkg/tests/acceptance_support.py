"""Shared builders for the training-based acceptance checks.

The desk-scale training runs take tens of minutes each on one core, so they
live in resumable run directories under an artifact root. Reruns of the
suite reuse finished runs only when the stored config is scientifically
identical (paths excluded); delete the root to force full retraining.
The root defaults to .acceptance_cache next to the package and can be
moved with TCWAE_ACCEPT_CACHE.
"""

from __future__ import annotations

import json
import os
from dataclasses import replace
from pathlib import Path

from tcwae.config import ExperimentConfig, config_hash, load_config, parse_config

REPO_ROOT = Path(__file__).resolve().parent.parent

DESK_DATASET = {
    "factors": [["shape", 3], ["orientation", 8], ["pos_x", 8], ["pos_y", 8]],
    "resolution": 64,
    "seed": 0,
    "noisy": False,
}

# single-core budget: batch 64 (the paper's own qualitative batch size)
# instead of the desk-default 100; MWS quality depends on batch size far
# more than on dataset passes, and 64 keeps the 6 x 15k-iteration campaign
# inside a workable wall-clock envelope.
CRIT7_BATCH = 64
CRIT7_ITERATIONS = 15_000
CRIT7_SEEDS = (0, 1, 2)
CRIT8_BETAS = (1.0, 4.0, 10.0)
CRIT8_SEEDS = (0, 1)
CRIT8_ITERATIONS = 3_000


def artifact_root() -> Path:
    root = os.environ.get("TCWAE_ACCEPT_CACHE")
    return Path(root) if root else REPO_ROOT / ".acceptance_cache"


def science_hash(cfg: ExperimentConfig) -> str:
    """Config hash with storage locations normalized away."""
    return config_hash(replace(cfg, output_dir="", run_name=None))


def crit7_config(arm: str, seed: int, root: Path) -> ExperimentConfig:
    beta = 4.0 if arm == "tcwae" else 0.0
    raw = {
        "objective": "tcwae_mws",
        "beta": beta,
        "gamma": beta,
        "seeds": [seed],
        "batch_size": CRIT7_BATCH,
        "iterations": CRIT7_ITERATIONS,
        "latent_dim": 10,
        "dataset": DESK_DATASET,
        "dtype": "f32",
        "output_dir": str(root),
        "run_name": f"{arm}_seed{seed}",
    }
    return parse_config(raw)


def crit8_config(root: Path) -> ExperimentConfig:
    raw = {
        "objective": "tcwae_mws",
        "beta": 1.0,
        "gamma": 1.0,
        "seeds": list(CRIT8_SEEDS),
        "batch_size": CRIT7_BATCH,
        "iterations": CRIT8_ITERATIONS,
        "latent_dim": 10,
        "dataset": DESK_DATASET,
        "dtype": "f32",
        "beta_grid": list(CRIT8_BETAS),
        "gamma_grid": [1.0],
        "output_dir": str(root),
    }
    return parse_config(raw)


def reusable_run_dir(cfg: ExperimentConfig, root: Path):
    """Existing run directory whose science config matches, else None."""
    run_dir = root / (cfg.run_name or "")
    cfg_file = run_dir / "config.json"
    if not cfg_file.exists():
        return None
    try:
        stored = load_config(cfg_file)
    except Exception:
        return None
    if science_hash(stored) != science_hash(cfg):
        return None
    for seed in cfg.seeds:
        if not (run_dir / f"seed{seed}" / "checkpoint_final.tcwl").exists():
            return None
    return run_dir


def ensure_run(cfg: ExperimentConfig, root: Path, dataset=None):
    """Train (or reuse) and evaluate; returns score rows."""
    import csv

    from tcwae.experiment import run_eval, run_training

    run_dir = reusable_run_dir(cfg, root)
    if run_dir is None:
        run_dir = run_training(cfg, out_root=str(root), dataset=dataset)
    scores = run_dir / "scores.csv"
    if not scores.exists():
        return run_eval(run_dir, dataset=dataset), run_dir
    with open(scores) as f:
        rows = []
        for row in csv.DictReader(f):
            rows.append(
                {
                    "model": row["model"],
                    "objective": row["objective"],
                    "beta": float(row["beta"]),
                    "gamma": float(row["gamma"]),
                    "seed": int(row["seed"]),
                    "mse": float(row["mse"]),
                    "mig": float(row["mig"]),
                    "factor_vae": float(row["factor_vae"]),
                    "sap": float(row["sap"]),
                }
            )
    return rows, run_dir


def json_cache(path: Path, key: str, compute):
    """Tiny JSON result cache for non-run-shaped artifacts."""
    data = {}
    if path.exists():
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError:
            data = {}
    if key in data:
        return data[key]
    value = compute()
    data[key] = value
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True))
    return value
