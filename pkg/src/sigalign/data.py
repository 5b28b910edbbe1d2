"""Synthetic domain-shifted datasets, CSV ingestion, and batch iteration.

The synthetic generator places class means on a deterministic unit layout
scaled by `separation`: an equal-angle ring in the first two input
dimensions, plus (when the input has more than two dimensions) a per-class
axis offset cycled over the remaining dimensions. Rotating the first two
dimensions therefore produces a controllable domain shift that moves
clusters toward their ring neighbours while the axis offsets keep them
identifiable.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .numerics import check_finite

Array = np.ndarray


@dataclass
class LabeledDataset:
    inputs: Array  # (N, d) float64
    labels: Array  # (N,) int64, values in [0, class_count)
    class_count: int

    def __post_init__(self) -> None:
        self.inputs = check_finite(self.inputs, "inputs")
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.inputs.ndim != 2:
            raise ValueError(f"inputs must be 2-D, got shape {self.inputs.shape}")
        if self.labels.ndim != 1 or self.labels.shape[0] != self.inputs.shape[0]:
            raise ValueError("labels must be a 1-D array matching the input rows")
        if self.class_count < 2:
            raise ValueError("class_count must be >= 2")
        if self.size < self.class_count:
            raise ValueError("need at least one sample per class")
        if self.labels.min() < 0 or self.labels.max() >= self.class_count:
            raise ValueError(
                f"labels must lie in [0, {self.class_count}), got range "
                f"[{int(self.labels.min())}, {int(self.labels.max())}]"
            )
        present = np.unique(self.labels)
        if present.size != self.class_count:
            missing = sorted(set(range(self.class_count)) - set(present.tolist()))
            raise ValueError(f"classes {missing} have no samples")

    @property
    def size(self) -> int:
        return self.inputs.shape[0]

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]


@dataclass(frozen=True)
class ShiftSpec:
    """Target-domain transform: rotate dims (0,1), translate, perturb, rebalance."""

    rotation_angle: float = 0.0  # radians
    translation: Sequence[float] | None = None  # length d, input units
    feature_noise_std: float = 0.0
    class_imbalance_ratios: Sequence[float] | None = None  # length C, > 0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.feature_noise_std < 0.0:
            raise ValueError("feature_noise_std must be >= 0")
        if self.class_imbalance_ratios is not None:
            ratios = np.asarray(self.class_imbalance_ratios, dtype=np.float64)
            if (ratios <= 0.0).any():
                raise ValueError("class_imbalance_ratios must all be > 0")


def class_mean_layout(class_count: int, dim: int) -> Array:
    """Deterministic unit-norm class means: ring in dims (0,1) + cycled axis offsets."""
    if class_count < 2 or dim < 2:
        raise ValueError("need class_count >= 2 and dim >= 2")
    means = np.zeros((class_count, dim))
    angles = 2.0 * math.pi * np.arange(class_count) / class_count
    ring = 1.0 if dim == 2 else 1.0 / math.sqrt(2.0)
    means[:, 0] = ring * np.cos(angles)
    means[:, 1] = ring * np.sin(angles)
    if dim > 2:
        axis = 1.0 / math.sqrt(2.0)
        for k in range(class_count):
            means[k, 2 + k % (dim - 2)] += axis
    return means


def make_gaussian_mixture(
    class_count: int,
    per_class_count: int,
    dim: int,
    separation: float,
    seed: int,
) -> LabeledDataset:
    """Isotropic unit-variance Gaussian clusters on the deterministic layout."""
    if class_count < 2 or dim < 2:
        raise ValueError("need class_count >= 2 and dim >= 2")
    if per_class_count < 1:
        raise ValueError("per_class_count must be >= 1")
    if separation <= 0.0:
        raise ValueError("separation must be > 0")
    rng = np.random.default_rng(seed)
    means = separation * class_mean_layout(class_count, dim)
    blocks = []
    labels = []
    for k in range(class_count):
        blocks.append(means[k] + rng.standard_normal((per_class_count, dim)))
        labels.append(np.full(per_class_count, k, dtype=np.int64))
    return LabeledDataset(np.vstack(blocks), np.concatenate(labels), class_count)


def apply_shift(dataset: LabeledDataset, spec: ShiftSpec) -> LabeledDataset:
    """Produce the shifted domain; labels travel with their samples."""
    inputs = dataset.inputs.copy()
    labels = dataset.labels.copy()
    d = dataset.input_dim

    if spec.rotation_angle != 0.0:
        c, s = math.cos(spec.rotation_angle), math.sin(spec.rotation_angle)
        x0, x1 = inputs[:, 0].copy(), inputs[:, 1].copy()
        inputs[:, 0] = c * x0 - s * x1
        inputs[:, 1] = s * x0 + c * x1

    if spec.translation is not None:
        shift = np.asarray(spec.translation, dtype=np.float64)
        if shift.shape != (d,):
            raise ValueError(f"translation must have length {d}, got shape {shift.shape}")
        inputs = inputs + shift

    rng = np.random.default_rng(spec.seed)
    if spec.feature_noise_std > 0.0:
        inputs = inputs + spec.feature_noise_std * rng.standard_normal(inputs.shape)

    if spec.class_imbalance_ratios is not None:
        ratios = np.asarray(spec.class_imbalance_ratios, dtype=np.float64)
        if ratios.shape != (dataset.class_count,):
            raise ValueError(
                f"class_imbalance_ratios must have length {dataset.class_count}, "
                f"got shape {ratios.shape}"
            )
        if not np.all(ratios == 1.0):
            keep: list[np.ndarray] = []
            for k in range(dataset.class_count):
                rows = np.flatnonzero(labels == k)
                target = max(1, int(round(ratios[k] * rows.size)))
                if target <= rows.size:
                    chosen = rng.choice(rows, size=target, replace=False)
                else:
                    extra = rng.choice(rows, size=target - rows.size, replace=True)
                    chosen = np.concatenate([rows, extra])
                keep.append(np.sort(chosen))
            order = np.sort(np.concatenate(keep))
            inputs = inputs[order]
            labels = labels[order]

    return LabeledDataset(inputs, labels, dataset.class_count)


def _label_sort_key(raw: str):
    try:
        return (0, float(raw), "")
    except ValueError:
        return (1, 0.0, raw)


def load_csv(path: str | Path, label_column: str) -> tuple[LabeledDataset, dict[str, int]]:
    """Load a numeric CSV with a header; returns the dataset and the label mapping.

    Distinct label strings are re-indexed to a dense [0, C) range, ordered
    numerically when every label parses as a number and lexicographically
    otherwise (so integer-labelled files round-trip exactly).
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if label_column not in header:
            raise ValueError(f"{path}: missing label column {label_column!r} in header {header}")
        label_idx = header.index(label_column)
        feature_cols = [(i, name) for i, name in enumerate(header) if i != label_idx]
        if not feature_cols:
            raise ValueError(f"{path}: no feature columns besides {label_column!r}")

        rows: list[list[float]] = []
        raw_labels: list[str] = []
        for row_num, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise ValueError(
                    f"{path}: row {row_num} has {len(row)} cells, expected {len(header)}"
                )
            values = []
            for col, name in feature_cols:
                cell = row[col].strip()
                try:
                    value = float(cell)
                except ValueError:
                    raise ValueError(
                        f"{path}: row {row_num}, column {name!r}: non-numeric cell {cell!r}"
                    ) from None
                if not math.isfinite(value):
                    raise ValueError(
                        f"{path}: row {row_num}, column {name!r}: non-finite value {cell!r}"
                    )
                values.append(value)
            rows.append(values)
            raw_labels.append(row[label_idx].strip())

    if not rows:
        raise ValueError(f"{path}: no data rows")
    mapping = {lab: i for i, lab in enumerate(sorted(set(raw_labels), key=_label_sort_key))}
    labels = np.array([mapping[lab] for lab in raw_labels], dtype=np.int64)
    dataset = LabeledDataset(np.array(rows, dtype=np.float64), labels, len(mapping))
    return dataset, mapping


def save_csv(dataset: LabeledDataset, path: str | Path, label_column: str = "label") -> None:
    """Write the dataset in the format load_csv reads back."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i}" for i in range(dataset.input_dim)] + [label_column])
        for row, label in zip(dataset.inputs, dataset.labels):
            writer.writerow([repr(float(v)) for v in row] + [str(int(label))])


def batches(
    data: LabeledDataset | Array,
    batch_size: int,
    seed: int,
    epoch: int,
) -> list[tuple[Array, Array]]:
    """Deterministic per-epoch shuffled batches of (index array, input rows).

    The permutation is keyed by (seed, epoch). A trailing batch smaller than
    2 samples is dropped because the pairwise loss needs at least one pair.
    """
    inputs = data.inputs if isinstance(data, LabeledDataset) else np.asarray(data, dtype=np.float64)
    if batch_size < 2:
        raise ValueError("batch_size must be >= 2")
    n = inputs.shape[0]
    rng = np.random.default_rng([seed, epoch])
    perm = rng.permutation(n)
    out = []
    for start in range(0, n, batch_size):
        idx = perm[start : start + batch_size]
        if idx.size >= 2:
            out.append((idx, inputs[idx]))
    return out
