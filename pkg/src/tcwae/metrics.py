"""Disentanglement scores (MIG, FactorVAE metric, SAP) and reconstruction MSE.

Scores operate on a ``RepresentationTable`` (posterior means plus ground
truth factors); the FactorVAE metric and MSE additionally need live model
handles since they encode fresh batches. All scores are invariant to latent
permutation and sign flips, and live in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datasets import FactorDataset, sample_fixed_factor_batch
from .rng import RngState


@dataclass(frozen=True)
class RepresentationTable:
    latents: np.ndarray  # [M, d] posterior means
    factors: np.ndarray  # [M, K] integer factor values
    factor_names: tuple

    def __post_init__(self):
        if self.latents.shape[0] != self.factors.shape[0]:
            raise ValueError("latents and factors disagree on row count")
        if not np.all(np.isfinite(self.latents)):
            raise ValueError("latent columns must be finite")


@dataclass(frozen=True)
class ScoreReport:
    mig: float
    factor_vae: float
    sap: float
    mse: float

    def __post_init__(self):
        for name in ("mig", "factor_vae", "sap"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} out of range: {v}")
        if self.mse < 0:
            raise ValueError("mse must be non-negative")


def discretize(column, bins: int) -> np.ndarray:
    """Equal-width binning between column min and max; constant columns -> bin 0."""
    if bins < 2:
        raise ValueError("bins must be >= 2")
    col = np.asarray(column, dtype=np.float64)
    lo, hi = np.min(col), np.max(col)
    if hi <= lo:
        return np.zeros(col.shape[0], dtype=np.int64)
    edges = np.linspace(lo, hi, bins + 1)[1:-1]
    return np.digitize(col, edges)


def discrete_mutual_information(a, b) -> float:
    """Plug-in mutual information (nats) of two integer sequences."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if a.shape != b.shape:
        raise ValueError("length mismatch")
    n = a.shape[0]
    na, nb = a.max() + 1, b.max() + 1
    joint = np.zeros((na, nb), dtype=np.float64)
    np.add.at(joint, (a, b), 1.0)
    joint /= n
    pa = joint.sum(axis=1, keepdims=True)
    pb = joint.sum(axis=0, keepdims=True)
    mask = joint > 0
    mi = float(np.sum(joint[mask] * np.log(joint[mask] / (pa @ pb)[mask])))
    return max(mi, 0.0)


def _entropy(labels) -> float:
    _, counts = np.unique(labels, return_counts=True)
    p = counts / counts.sum()
    return float(-np.sum(p * np.log(p)))


def mig(table: RepresentationTable, bins: int = 20) -> float:
    """Mean over factors of the normalized gap between the top-two latent MIs."""
    m, d = table.latents.shape
    if d < 2:
        raise ValueError("MIG needs at least two latent dimensions")
    discretized = np.stack([discretize(table.latents[:, j], bins) for j in range(d)], axis=1)
    gaps = []
    for k in range(table.factors.shape[1]):
        h = _entropy(table.factors[:, k])
        if h <= 0:
            continue
        mis = np.array(
            [discrete_mutual_information(discretized[:, j], table.factors[:, k]) for j in range(d)]
        )
        top2 = np.sort(mis)[::-1][:2]
        gaps.append((top2[0] - top2[1]) / h)
    return float(np.clip(np.mean(gaps), 0.0, 1.0))


def _collect_factor_votes(encode_fn, dataset, rng, votes, batch_per_vote, prune_threshold):
    latents = encode_fn(dataset.images)
    variances = np.var(latents, axis=0)
    keep = np.where(variances >= prune_threshold)[0]
    if keep.size == 0:
        raise ValueError("collapsed representation")
    stds = np.sqrt(variances[keep])

    usable_factors = [k for k, c in enumerate(dataset.spec.cardinalities) if c >= 2]
    vote_dims = np.empty(votes, dtype=np.int64)
    vote_factors = np.empty(votes, dtype=np.int64)
    for v in range(votes):
        k = usable_factors[int(rng.integers(0, len(usable_factors)))]
        images, _ = sample_fixed_factor_batch(dataset, k, batch_per_vote, rng)
        z = encode_fn(images)[:, keep] / stds
        vote_dims[v] = int(np.argmin(np.var(z, axis=0)))
        vote_factors[v] = k
    return vote_dims, vote_factors, keep.size


def factor_vae_score(
    encode_fn,
    dataset: FactorDataset,
    rng: RngState,
    votes: int = 1000,
    batch_per_vote: int = 64,
    prune_threshold: float = 0.05,
) -> float:
    """Majority-vote accuracy of the fixed-factor / least-variance-dimension game.

    ``encode_fn`` maps an image batch to posterior means. Dimensions whose
    variance over the dataset falls below ``prune_threshold`` are discarded;
    the remaining ones are normalized by their dataset standard deviation.
    The first 80% of votes fit the majority classifier, the rest score it.
    """
    vote_dims, vote_factors, n_dims = _collect_factor_votes(
        encode_fn, dataset, rng, votes, batch_per_vote, prune_threshold
    )
    n_train = int(votes * 0.8)
    n_factors = len(dataset.spec.cardinalities)
    counts = np.zeros((n_dims, n_factors), dtype=np.int64)
    np.add.at(counts, (vote_dims[:n_train], vote_factors[:n_train]), 1)
    classifier = np.argmax(counts, axis=1)
    predicted = classifier[vote_dims[n_train:]]
    return float(np.mean(predicted == vote_factors[n_train:]))


def sap_score(table: RepresentationTable) -> float:
    """Mean over factors of the gap between the two largest squared correlations."""
    latents = table.latents
    factors = table.factors.astype(np.float64)
    m, d = latents.shape
    if m < 100:
        raise ValueError("SAP needs at least 100 rows")
    z = latents - latents.mean(axis=0)
    v = factors - factors.mean(axis=0)
    z_var = np.sum(z ** 2, axis=0)
    v_var = np.sum(v ** 2, axis=0)
    gaps = []
    for k in range(factors.shape[1]):
        if v_var[k] <= 0:
            continue
        cov = z.T @ v[:, k]
        with np.errstate(invalid="ignore", divide="ignore"):
            s = np.where(z_var > 0, cov ** 2 / (z_var * v_var[k]), 0.0)
        top2 = np.sort(s)[::-1][:2]
        gaps.append(top2[0] - (top2[1] if s.size > 1 else 0.0))
    return float(np.clip(np.mean(gaps), 0.0, 1.0))


def reconstruction_mse(encode_fn, decode_fn, dataset: FactorDataset, eval_size: int = 10_000, batch: int = 1000) -> float:
    """Mean per-image sum of squared pixel errors on the deterministic path."""
    n = min(dataset.size, eval_size)
    total = 0.0
    for start in range(0, n, batch):
        x = dataset.images[start : start + batch].astype(np.float64)
        codes = encode_fn(x)
        x_hat = np.asarray(decode_fn(codes), dtype=np.float64)
        total += float(np.sum((x - x_hat) ** 2))
    return total / n


def score_representation(
    encode_fn,
    decode_fn,
    dataset: FactorDataset,
    rng: RngState,
    bins: int = 20,
) -> ScoreReport:
    """All four scores for one trained model on one dataset.

    A collapsed representation (every latent dimension pruned) cannot play
    the fixed-factor game; it scores 0.0 on the FactorVAE metric here so
    degenerate models remain evaluable and rank below chance.
    """
    latents = encode_fn(dataset.images)
    table = RepresentationTable(latents, dataset.factors, dataset.spec.names)
    try:
        fv = factor_vae_score(encode_fn, dataset, rng)
    except ValueError as e:
        if "collapsed" not in str(e):
            raise
        fv = 0.0
    return ScoreReport(
        mig=mig(table, bins=bins),
        factor_vae=fv,
        sap=sap_score(table),
        mse=reconstruction_mse(encode_fn, decode_fn, dataset),
    )
