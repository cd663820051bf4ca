"""Adam with bias correction, functional over named parameter maps."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict

import numpy as np


@dataclass(frozen=True)
class AdamConfig:
    learning_rate: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 8e-4

    def __post_init__(self):
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise ValueError("beta1 and beta2 must lie in (0, 1)")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


# Table-7 discriminator settings.
DISC_ADAM = AdamConfig(learning_rate=1e-4, beta1=0.5, beta2=0.9, epsilon=1e-8)


@dataclass
class AdamState:
    t: int
    m: Dict[str, np.ndarray]
    v: Dict[str, np.ndarray]


def adam_init(params: Dict[str, np.ndarray]) -> AdamState:
    return AdamState(
        t=0,
        m={k: np.zeros_like(p) for k, p in params.items()},
        v={k: np.zeros_like(p) for k, p in params.items()},
    )


def adam_step(params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray], state: AdamState, cfg: AdamConfig):
    """One update; returns (new params, new state) without mutating inputs."""
    if set(params) != set(grads):
        missing = set(params) ^ set(grads)
        raise KeyError(f"parameter/gradient key mismatch: {sorted(missing)}")
    t = state.t + 1
    c1 = 1.0 - cfg.beta1 ** t
    c2 = 1.0 - cfg.beta2 ** t
    new_params, new_m, new_v = {}, {}, {}
    for k, p in params.items():
        g = grads[k]
        m = cfg.beta1 * state.m[k] + (1.0 - cfg.beta1) * g
        v = cfg.beta2 * state.v[k] + (1.0 - cfg.beta2) * (g * g)
        step = cfg.learning_rate * (m / c1) / (np.sqrt(v / c2) + cfg.epsilon)
        new_params[k] = p - step.astype(p.dtype, copy=False)
        new_m[k] = m
        new_v[k] = v
    return new_params, AdamState(t=t, m=new_m, v=new_v)
