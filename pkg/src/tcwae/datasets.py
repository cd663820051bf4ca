"""Procedural sprite datasets with exact ground-truth factors.

A full factor grid is rendered deterministically: every combination of the
requested factor values produces one binary image (4x supersampled
rasterization thresholded at 0.5). Orientations are mapped into each
shape's symmetry-reduced range so distinct factor tuples stay visually
distinct.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Tuple

import numpy as np

from .rng import RngState

KNOWN_FACTORS = ("shape", "scale", "orientation", "pos_x", "pos_y")
SUPERSAMPLE = 4
_SHAPE_NAMES = ("square", "ellipse", "triangle")
# symmetry-reduced orientation ranges per shape
_SYMMETRY = {"square": np.pi / 2, "ellipse": np.pi, "triangle": 2 * np.pi / 3}
# characteristic radii as a fraction of the image side, at scale 1
_SQUARE_HALF_SIDE = 0.14
_ELLIPSE_AXES = (0.18, 0.11)
_TRIANGLE_RADIUS = 0.19
_POS_RANGE = (0.32, 0.68)
_SCALE_RANGE = (0.5, 1.0)


@dataclass(frozen=True)
class FactorSpec:
    names: Tuple[str, ...]
    cardinalities: Tuple[int, ...]

    def __post_init__(self):
        if len(self.names) != len(self.cardinalities):
            raise ValueError("names and cardinalities must have equal length")
        for n in self.names:
            if n not in KNOWN_FACTORS:
                raise ValueError(f"unknown factor name {n!r}")
        if len(set(self.names)) != len(self.names):
            raise ValueError("duplicate factor names")
        for n, c in zip(self.names, self.cardinalities):
            if c < 1:
                raise ValueError("cardinalities must be positive")
            if n == "shape" and c > len(_SHAPE_NAMES):
                raise ValueError("shape supports at most 3 values")
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "cardinalities", tuple(int(c) for c in self.cardinalities))

    @property
    def num_factors(self) -> int:
        return len(self.names)

    @property
    def grid_size(self) -> int:
        return int(np.prod(self.cardinalities))


def desk_factor_spec() -> FactorSpec:
    """Scaled-down factor table: shape(3) x orientation(8) x pos_x(8) x pos_y(8)."""
    return FactorSpec(("shape", "orientation", "pos_x", "pos_y"), (3, 8, 8, 8))


@dataclass(frozen=True)
class FactorDataset:
    images: np.ndarray  # [M, H, W, C] float32 in [0, 1]
    factors: np.ndarray  # [M, K] integer factor values
    spec: FactorSpec
    resolution: int
    seed: int

    @property
    def size(self) -> int:
        return self.images.shape[0]

    @property
    def channels(self) -> int:
        return self.images.shape[3]

    def is_full_grid(self) -> bool:
        return self.size == self.spec.grid_size

    def grid_index(self, factor_values: np.ndarray) -> np.ndarray:
        """Row-major index of factor tuples into the full grid."""
        if not self.is_full_grid():
            raise ValueError("dataset is not a full factor grid")
        idx = np.zeros(factor_values.shape[0], dtype=np.int64)
        for k, card in enumerate(self.spec.cardinalities):
            idx = idx * card + factor_values[:, k]
        return idx


def _factor_grid(spec: FactorSpec) -> np.ndarray:
    grids = np.indices(spec.cardinalities)
    return grids.reshape(spec.num_factors, -1).T.astype(np.int64)


def _factor_params(spec: FactorSpec, row: np.ndarray) -> dict:
    values = {"shape": 0, "scale": 1.0, "orientation": 0.0, "pos_x": 0.5, "pos_y": 0.5}
    shape_idx = 0
    for name, card, v in zip(spec.names, spec.cardinalities, row):
        if name == "shape":
            shape_idx = int(v)
        elif name == "scale":
            values["scale"] = float(np.linspace(*_SCALE_RANGE, card)[v]) if card > 1 else _SCALE_RANGE[1]
        elif name in ("pos_x", "pos_y"):
            values[name] = float(np.linspace(*_POS_RANGE, card)[v]) if card > 1 else 0.5
    values["shape"] = shape_idx
    shape_name = _SHAPE_NAMES[shape_idx]
    for name, card, v in zip(spec.names, spec.cardinalities, row):
        if name == "orientation":
            values["orientation"] = _SYMMETRY[shape_name] * float(v) / card
    values["shape_name"] = shape_name
    return values


def _render(params: dict, resolution: int) -> np.ndarray:
    n = resolution * SUPERSAMPLE
    u = (np.arange(n) + 0.5) / n
    xx, yy = np.meshgrid(u, u, indexing="xy")
    dx = xx - params["pos_x"]
    dy = yy - params["pos_y"]
    theta = params["orientation"]
    ct, st = np.cos(theta), np.sin(theta)
    rx = ct * dx + st * dy
    ry = -st * dx + ct * dy
    s = params["scale"]
    kind = params["shape_name"]
    if kind == "square":
        h = _SQUARE_HALF_SIDE * s
        inside = (np.abs(rx) <= h) & (np.abs(ry) <= h)
    elif kind == "ellipse":
        a, b = (_ELLIPSE_AXES[0] * s, _ELLIPSE_AXES[1] * s)
        inside = (rx / a) ** 2 + (ry / b) ** 2 <= 1.0
    else:
        r = _TRIANGLE_RADIUS * s
        angles = np.pi / 2 + np.array([0.0, 2 * np.pi / 3, 4 * np.pi / 3])
        vx, vy = r * np.cos(angles), r * np.sin(angles)
        inside = np.ones_like(rx, dtype=bool)
        area = (vx[1] - vx[0]) * (vy[2] - vy[0]) - (vy[1] - vy[0]) * (vx[2] - vx[0])
        for i in range(3):
            j = (i + 1) % 3
            cross = (vx[j] - vx[i]) * (ry - vy[i]) - (vy[j] - vy[i]) * (rx - vx[i])
            inside &= cross * area >= 0
    coverage = inside.reshape(resolution, SUPERSAMPLE, resolution, SUPERSAMPLE).mean(axis=(1, 3))
    return (coverage >= 0.5).astype(np.float32)


def generate_sprites(spec: FactorSpec, resolution: int, seed: int = 0) -> FactorDataset:
    """Render one binary image per factor combination; pure in (spec, resolution, seed)."""
    if resolution not in (8, 16, 32, 64):
        raise ValueError("resolution must be one of 8, 16, 32, 64")
    factors = _factor_grid(spec)
    images = np.empty((factors.shape[0], resolution, resolution, 1), dtype=np.float32)
    for m, row in enumerate(factors):
        images[m, :, :, 0] = _render(_factor_params(spec, row), resolution)
    return FactorDataset(images, factors, spec, resolution, int(seed))


def add_noise_background(ds: FactorDataset, rng: RngState) -> FactorDataset:
    """Replace background with iid U[0,1] RGB noise; sprite pixels become white."""
    if ds.channels != 1:
        raise ValueError("noise background expects single-channel input")
    m, h, w, _ = ds.images.shape
    noise = rng.uniform((m, h, w, 3), dtype=np.float64).astype(np.float32)
    sprite = ds.images >= 0.5
    out = np.where(sprite, np.float32(1.0), noise)
    return FactorDataset(out, ds.factors, ds.spec, ds.resolution, ds.seed)


def iterate_minibatches(ds: FactorDataset, batch_size: int, rng: RngState):
    """Endless stream of uniformly-with-replacement sampled (images, factors)."""
    if batch_size > ds.size:
        raise ValueError("batch_size exceeds dataset size")
    while True:
        idx = rng.integers(0, ds.size, size=batch_size)
        yield ds.images[idx], ds.factors[idx]


def _sample_fixed_factor_indices(ds: FactorDataset, factor_index: int, batch_size: int, rng: RngState):
    cards = ds.spec.cardinalities
    if cards[factor_index] < 2:
        raise ValueError("fixed factor must have cardinality >= 2")
    fixed_value = int(rng.integers(0, cards[factor_index]))
    cols = []
    for k, card in enumerate(cards):
        if k == factor_index:
            cols.append(np.full(batch_size, fixed_value, dtype=np.int64))
        else:
            cols.append(rng.integers(0, card, size=batch_size))
    values = np.stack(cols, axis=1)
    return ds.grid_index(values), fixed_value


def sample_fixed_factor_batch(ds: FactorDataset, factor_index: int, batch_size: int, rng: RngState):
    """Batch sharing one random value of factor ``factor_index``; others uniform."""
    idx, fixed_value = _sample_fixed_factor_indices(ds, factor_index, batch_size, rng)
    return ds.images[idx], fixed_value


# ---------------------------------------------------------------------------
# on-disk format: images.bin ("TCWD" + dims + raw f32), factors.csv, spec.json
# ---------------------------------------------------------------------------

_MAGIC = b"TCWD"


def export_dataset(ds: FactorDataset, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "images.bin", "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<4Q", *ds.images.shape))
        f.write(np.ascontiguousarray(ds.images, dtype="<f4").tobytes())
    with open(directory / "factors.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(ds.spec.names)
        writer.writerows(ds.factors.tolist())
    with open(directory / "spec.json", "w") as f:
        json.dump(
            {
                "names": list(ds.spec.names),
                "cardinalities": list(ds.spec.cardinalities),
                "resolution": ds.resolution,
                "seed": ds.seed,
            },
            f,
            indent=2,
        )


def load_dataset(directory) -> FactorDataset:
    directory = Path(directory)
    with open(directory / "spec.json") as f:
        meta = json.load(f)
    spec = FactorSpec(tuple(meta["names"]), tuple(meta["cardinalities"]))
    with open(directory / "images.bin", "rb") as f:
        if f.read(4) != _MAGIC:
            raise ValueError("bad images.bin magic")
        dims = struct.unpack("<4Q", f.read(32))
        images = np.frombuffer(f.read(), dtype="<f4").reshape(dims)
    factors = []
    with open(directory / "factors.csv", newline="") as f:
        reader = csv.reader(f)
        names = tuple(next(reader))
        if names != spec.names:
            raise ValueError("factors.csv header does not match spec.json")
        factors = [[int(v) for v in row] for row in reader]
    return FactorDataset(
        np.array(images, dtype=np.float32),
        np.asarray(factors, dtype=np.int64),
        spec,
        int(meta["resolution"]),
        int(meta["seed"]),
    )
