"""Memory bank: current feature and prediction of every target sample.

Rows are addressed by target-sample index and hard-replaced on update.
Neighbour retrieval is an exact linear scan under cosine similarity on the
raw features, with ties broken toward the lower sample index and the query
sample always excluded.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .model import ModelParameters, forward
from .numerics import check_finite, is_probability_vector

Array = np.ndarray


@dataclass
class MemoryBank:
    features: Array  # (N_t, h)
    predictions: Array  # (N_t, C)

    def __post_init__(self) -> None:
        self.features = check_finite(self.features, "features")
        self.predictions = check_finite(self.predictions, "predictions")
        if self.features.ndim != 2 or self.predictions.ndim != 2:
            raise ValueError("bank stores must be 2-D")
        if self.features.shape[0] != self.predictions.shape[0]:
            raise ValueError("feature and prediction stores must have equal row counts")

    @property
    def size(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class NeighborSet:
    center_index: int
    neighbor_indices: Array  # (K,) int64, never contains center_index
    similarities: Array  # (K,) float64, non-increasing

    def __post_init__(self) -> None:
        if self.neighbor_indices.shape != self.similarities.shape:
            raise ValueError("indices and similarities must have equal length")
        if (self.neighbor_indices == self.center_index).any():
            raise ValueError("neighbor set contains the center sample")


def build(model: ModelParameters, target_inputs: Array) -> MemoryBank:
    """One full no-gradient forward pass over the target set, in dataset order."""
    inputs = np.asarray(target_inputs, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape[0] == 0:
        raise ValueError("target set must be a non-empty 2-D matrix")
    features, predictions = forward(model, inputs)
    return MemoryBank(features.copy(), predictions.copy())


def update(
    bank: MemoryBank,
    indices: Sequence[int] | Array,
    features: Array,
    predictions: Array,
) -> None:
    """Hard-replace exactly the given rows; every other row is untouched."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim != 1:
        raise ValueError("indices must be 1-D")
    if np.unique(idx).size != idx.size:
        raise ValueError("indices must be unique within one update")
    if idx.size and (idx.min() < 0 or idx.max() >= bank.size):
        raise ValueError(f"index out of range [0, {bank.size})")
    feats = check_finite(features, "features")
    preds = check_finite(predictions, "predictions")
    if feats.shape != (idx.size, bank.features.shape[1]):
        raise ValueError(f"features must be ({idx.size}, {bank.features.shape[1]})")
    if preds.shape != (idx.size, bank.predictions.shape[1]):
        raise ValueError(f"predictions must be ({idx.size}, {bank.predictions.shape[1]})")
    for row in preds:
        if not is_probability_vector(row):
            raise ValueError("every updated prediction row must be a probability vector")
    bank.features[idx] = feats
    bank.predictions[idx] = preds


def _normalized_rows(features: Array) -> Array:
    norms = np.linalg.norm(features, axis=1, keepdims=True)
    # Zero-norm rows stay zero: similarity 0 to everything, ties fall to index order.
    safe = np.where(norms == 0.0, 1.0, norms)
    return features / safe


def knn(bank: MemoryBank, center_index: int, k: int) -> NeighborSet:
    """The k bank rows (excluding the center) most cosine-similar to its feature."""
    return knn_for_batch(bank, [center_index], k)[0]


def knn_for_batch(
    bank: MemoryBank,
    center_indices: Sequence[int] | Array,
    k: int,
) -> list[NeighborSet]:
    """Batched exact scan; identical results to per-center knn calls."""
    centers = np.asarray(center_indices, dtype=np.int64)
    if centers.ndim != 1 or centers.size == 0:
        raise ValueError("center_indices must be a non-empty 1-D sequence")
    if centers.min() < 0 or centers.max() >= bank.size:
        raise ValueError(f"center index out of range [0, {bank.size})")
    if not 1 <= k <= bank.size - 1:
        raise ValueError(f"k must be in [1, {bank.size - 1}], got {k}")
    normalized = _normalized_rows(bank.features)
    sims = normalized[centers] @ normalized.T  # (B, N_t)
    sims[np.arange(centers.size), centers] = -np.inf
    # Stable sort keeps index order on ties, so equal similarities resolve
    # toward the lower sample index.
    order = np.argsort(-sims, axis=1, kind="stable")[:, :k]
    out = []
    for row, center in enumerate(centers):
        idx = order[row].astype(np.int64)
        out.append(NeighborSet(int(center), idx, sims[row, idx].copy()))
    return out


def dump_csv(bank: MemoryBank, path: str | Path) -> None:
    """Debug snapshot: sample_index, feature components, prediction components."""
    h = bank.features.shape[1]
    c = bank.predictions.shape[1]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["sample_index"] + [f"f{i}" for i in range(h)] + [f"p{i}" for i in range(c)]
        )
        for i in range(bank.size):
            writer.writerow(
                [i]
                + [repr(float(v)) for v in bank.features[i]]
                + [repr(float(v)) for v in bank.predictions[i]]
            )
