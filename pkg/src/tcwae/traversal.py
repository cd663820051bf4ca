"""Latent traversals: decode sweeps of one latent dimension at a time.

Grids are ordered by increasing per-dimension KL to the prior averaged over
the evaluation set, so the most prior-like (least informative) dimensions
come first, and are emitted as binary PGM (P5) / PPM (P6) files.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .datasets import FactorDataset
from .rng import RngState


def per_dimension_prior_kl(means: np.ndarray, log_vars: np.ndarray) -> np.ndarray:
    """Average over rows of the closed-form per-dimension KL(q(z|x) || N(0,1))."""
    kl = 0.5 * (means ** 2 + np.exp(log_vars) - 1.0 - log_vars)
    return kl.mean(axis=0)


def write_pnm(path, image: np.ndarray) -> None:
    """Write [H, W] as P5 or [H, W, 3] as P6, 8-bit binary."""
    arr = np.asarray(image)
    data = np.clip(np.round(arr * 255.0), 0, 255).astype(np.uint8)
    if data.ndim == 2:
        header = f"P5\n{data.shape[1]} {data.shape[0]}\n255\n"
    elif data.ndim == 3 and data.shape[2] == 3:
        header = f"P6\n{data.shape[1]} {data.shape[0]}\n255\n"
    else:
        raise ValueError("expected [H,W] grayscale or [H,W,3] color")
    with open(path, "wb") as f:
        f.write(header.encode())
        f.write(data.tobytes())


def read_pnm(path):
    with open(path, "rb") as f:
        magic = f.readline().strip()
        dims = f.readline().split()
        maxval = f.readline().strip()
        w, h = int(dims[0]), int(dims[1])
        del maxval
        raw = np.frombuffer(f.read(), dtype=np.uint8)
    if magic == b"P5":
        return raw.reshape(h, w)
    if magic == b"P6":
        return raw.reshape(h, w, 3)
    raise ValueError(f"unsupported PNM magic {magic!r}")


def traversal_grids(handle, dataset: FactorDataset, rng: RngState, steps: int, value_range=(-4.0, 4.0), rows: int = 4):
    """Per-dimension image grids plus the KL-based dimension ordering.

    Returns (grids, order, kls): grids[j] is [rows, steps, H, W, C] for
    latent dimension order[j]; order sorts dimensions by increasing mean
    per-dimension prior KL.
    """
    if steps < 2:
        raise ValueError("steps must be >= 2")
    lo, hi = value_range
    post = handle.encode_posteriors(dataset.images)
    kls = per_dimension_prior_kl(post.mean, post.log_var)
    order = np.argsort(kls, kind="stable")
    row_idx = rng.choice(dataset.size, size=min(rows, dataset.size), replace=False)
    base = post.mean[row_idx]  # [rows, d]
    d = base.shape[1]
    values = np.linspace(lo, hi, steps)
    grids = []
    for dim in order:
        codes = np.repeat(base, steps, axis=0)  # [rows*steps, d]
        codes[:, dim] = np.tile(values, base.shape[0])
        images = handle.decode_mean(codes)
        grids.append(images.reshape(base.shape[0], steps, *images.shape[1:]))
    return grids, order, kls


def emit_traversals(directory, handle, dataset: FactorDataset, rng: RngState, steps: int = 8, value_range=(-4.0, 4.0), rows: int = 4):
    """Write one PGM/PPM per latent dimension plus an index CSV; returns paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    grids, order, kls = traversal_grids(handle, dataset, rng, steps, value_range, rows)
    paths = []
    ext = "ppm" if dataset.channels == 3 else "pgm"
    for rank, (dim, grid) in enumerate(zip(order, grids)):
        r, s, h, w, c = grid.shape
        tiled = grid.transpose(0, 2, 1, 3, 4).reshape(r * h, s * w, c)
        img = tiled[:, :, 0] if c == 1 else tiled
        path = directory / f"traversal_r{rank:02d}_z{dim:02d}.{ext}"
        write_pnm(path, img)
        paths.append(path)
    with open(directory / "index.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["rank", "dimension", "mean_prior_kl"])
        for rank, dim in enumerate(order):
            writer.writerow([rank, int(dim), repr(float(kls[dim]))])
    return paths
