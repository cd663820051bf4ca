"""Checkpoint file format: "TCWL" magic, u32 version, named f64 tensors."""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Dict

import numpy as np

MAGIC = b"TCWL"
VERSION = 1


def save_checkpoint(path, params: Dict[str, Dict[str, np.ndarray]]) -> None:
    """Write grouped parameters as flat "group/name" records, doubles LE."""
    path = Path(path)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        for group in sorted(params):
            for name in sorted(params[group]):
                tensor = np.asarray(params[group][name], dtype="<f8")
                flat_name = f"{group}/{name}".encode()
                f.write(struct.pack("<Q", len(flat_name)))
                f.write(flat_name)
                f.write(struct.pack("<Q", tensor.ndim))
                f.write(struct.pack(f"<{tensor.ndim}Q", *tensor.shape))
                f.write(np.ascontiguousarray(tensor).tobytes())


def load_checkpoint(path) -> Dict[str, Dict[str, np.ndarray]]:
    path = Path(path)
    out: Dict[str, Dict[str, np.ndarray]] = {}
    with open(path, "rb") as f:
        if f.read(4) != MAGIC:
            raise ValueError(f"{path} is not a checkpoint file")
        (version,) = struct.unpack("<I", f.read(4))
        if version != VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        while True:
            head = f.read(8)
            if not head:
                break
            (name_len,) = struct.unpack("<Q", head)
            flat_name = f.read(name_len).decode()
            (rank,) = struct.unpack("<Q", f.read(8))
            shape = struct.unpack(f"<{rank}Q", f.read(8 * rank)) if rank else ()
            count = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(f.read(8 * count), dtype="<f8").reshape(shape)
            group, name = flat_name.split("/", 1)
            out.setdefault(group, {})[name] = np.array(data)
    return out
