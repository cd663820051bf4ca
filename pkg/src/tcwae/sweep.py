"""Beta/gamma sweeps: train + eval every (beta, gamma, seed) grid cell.

Cells are independent pure functions of (config, beta, gamma, seed), so
parallel workers cannot change results; failures are recorded per cell and
the sweep continues. Emits the full result table, per-metric heat-map
matrices of seed means, and a rank-aggregation summary.
"""

from __future__ import annotations

import csv
import multiprocessing
from dataclasses import replace
from pathlib import Path
from typing import Optional

import numpy as np

from .config import ExperimentConfig, config_to_dict, parse_config
from .experiment import make_dataset, run_eval, run_training

RESULT_COLUMNS = (
    "model", "objective", "beta", "gamma", "seed",
    "mse", "mig", "factor_vae", "sap",
    "reconstruction", "tc", "dimwise_kl", "index_code_mi", "total",
    "error",
)
METRICS = ("mse", "mig", "factor_vae", "sap")


def _cell_config(cfg: ExperimentConfig, beta: float, gamma: float, seed: int) -> ExperimentConfig:
    return replace(
        cfg,
        beta=beta,
        gamma=gamma,
        seeds=(seed,),
        run_name=f"{cfg.objective}_b{beta:g}_g{gamma:g}_s{seed}",
    )


def _run_cell(args):
    raw_cfg, beta, gamma, seed, out_root = args
    cfg = _cell_config(parse_config(raw_cfg), beta, gamma, seed)
    row = {"model": cfg.run_name, "objective": cfg.objective, "beta": beta, "gamma": gamma, "seed": seed, "error": ""}
    try:
        dataset = make_dataset(cfg)
        run_dir = run_training(cfg, out_root=out_root, dataset=dataset)
        scores = run_eval(run_dir, dataset=dataset)[0]
        row.update({k: scores[k] for k in METRICS})
        last = _final_loss_row(run_dir / f"seed{seed}" / "loss_log.csv")
        row.update(last)
    except Exception as e:  # noqa: BLE001 - cell failures must not kill the sweep
        row["error"] = f"{type(e).__name__}: {e}"
    return row


def _final_loss_row(path) -> dict:
    with open(path, newline="") as f:
        last = list(csv.DictReader(f))[-1]
    return {k: float(last[k]) for k in ("reconstruction", "tc", "dimwise_kl", "index_code_mi", "total")}


def run_sweep(cfg: ExperimentConfig, out_root: Optional[str] = None, workers: int = 1) -> Path:
    if not cfg.beta_grid or not cfg.gamma_grid:
        raise ValueError("sweep needs non-empty beta_grid and gamma_grid")
    root = Path(out_root or cfg.output_dir)
    sweep_dir = root / f"sweep_{cfg.objective}"
    sweep_dir.mkdir(parents=True, exist_ok=True)
    raw_cfg = config_to_dict(cfg)
    jobs = [
        (raw_cfg, beta, gamma, seed, str(sweep_dir / "cells"))
        for beta in cfg.beta_grid
        for gamma in cfg.gamma_grid
        for seed in cfg.seeds
    ]
    if workers > 1:
        with multiprocessing.Pool(workers) as pool:
            rows = pool.map(_run_cell, jobs)
    else:
        rows = [_run_cell(j) for j in jobs]

    with open(sweep_dir / "sweep_results.csv", "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=RESULT_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in RESULT_COLUMNS})

    _write_heatmaps(cfg, rows, sweep_dir)
    _write_summary(cfg, rows, sweep_dir)
    return sweep_dir


def seed_mean_matrix(cfg: ExperimentConfig, rows, metric: str) -> np.ndarray:
    """|beta_grid| x |gamma_grid| matrix of per-cell seed means (NaN on failures)."""
    out = np.full((len(cfg.beta_grid), len(cfg.gamma_grid)), np.nan)
    for bi, beta in enumerate(cfg.beta_grid):
        for gi, gamma in enumerate(cfg.gamma_grid):
            vals = [
                row[metric]
                for row in rows
                if row["beta"] == beta and row["gamma"] == gamma and not row["error"] and metric in row
            ]
            if vals:
                out[bi, gi] = float(np.mean(vals))
    return out


def _write_heatmaps(cfg: ExperimentConfig, rows, sweep_dir: Path) -> None:
    for metric in METRICS:
        matrix = seed_mean_matrix(cfg, rows, metric)
        with open(sweep_dir / f"heatmap_{metric}.csv", "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["beta\\gamma"] + [repr(g) for g in cfg.gamma_grid])
            for bi, beta in enumerate(cfg.beta_grid):
                writer.writerow([repr(beta)] + [repr(float(v)) for v in matrix[bi]])


def _write_summary(cfg: ExperimentConfig, rows, sweep_dir: Path) -> None:
    """Per-(beta, gamma) seed means plus the mean of per-metric ranks.

    Ranks are over grid cells; lower MSE ranks better, higher scores rank
    better. The summary orders cells by ascending mean rank but makes no
    claim beyond that aggregation.
    """
    cells = [(beta, gamma) for beta in cfg.beta_grid for gamma in cfg.gamma_grid]
    means = {metric: seed_mean_matrix(cfg, rows, metric).reshape(-1) for metric in METRICS}
    ranks = np.zeros((len(cells), len(METRICS)))
    for mi, metric in enumerate(METRICS):
        vals = means[metric]
        order = vals if metric == "mse" else -vals
        # NaN cells rank last
        order = np.where(np.isnan(order), np.inf, order)
        ranks[:, mi] = np.argsort(np.argsort(order, kind="stable"), kind="stable") + 1
    mean_rank = ranks.mean(axis=1)
    with open(sweep_dir / "sweep_summary.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["beta", "gamma"] + [f"mean_{m}" for m in METRICS] + ["mean_rank"])
        for ci in np.argsort(mean_rank, kind="stable"):
            beta, gamma = cells[ci]
            writer.writerow(
                [repr(beta), repr(gamma)]
                + [repr(float(means[m][ci])) for m in METRICS]
                + [repr(float(mean_rank[ci]))]
            )
