"""Two-part network (feature extractor + linear classifier) in plain numpy.

The extractor is a stack of fully connected layers, each followed by tanh,
so every gradient is exact and finite-difference checkable. The classifier
is a single linear layer whose logits feed a row-wise softmax. Training is
classic SGD with heavy-ball momentum; source pre-training uses
label-smoothed cross-entropy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import data as data_mod
from .numerics import check_finite, log_softmax_rows, softmax_rows

Array = np.ndarray


@dataclass
class Layer:
    weight: Array  # (fan_in, fan_out)
    bias: Array  # (fan_out,)

    def copy(self) -> "Layer":
        return Layer(self.weight.copy(), self.bias.copy())


@dataclass
class ModelParameters:
    extractor: list[Layer]  # tanh after every layer; last output is the feature
    classifier: Layer  # linear, (feature_dim, class_count)

    @property
    def input_dim(self) -> int:
        return self.extractor[0].weight.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.extractor[-1].weight.shape[1]

    @property
    def class_count(self) -> int:
        return self.classifier.weight.shape[1]

    def layers(self) -> list[Layer]:
        return [*self.extractor, self.classifier]

    def copy(self) -> "ModelParameters":
        return ModelParameters([l.copy() for l in self.extractor], self.classifier.copy())

    def validate(self) -> None:
        dims = [l.weight.shape for l in self.layers()]
        for (a, b) in zip(dims, dims[1:]):
            if a[1] != b[0]:
                raise ValueError(f"layer dimensions do not chain: {dims}")
        for i, layer in enumerate(self.layers()):
            if layer.bias.shape != (layer.weight.shape[1],):
                raise ValueError(f"layer {i} bias shape {layer.bias.shape} mismatches weight")
            check_finite(layer.weight, f"layer {i} weight")
            check_finite(layer.bias, f"layer {i} bias")


# Gradients mirror the layer list: one (d_weight, d_bias) pair per layer,
# extractor layers first, classifier last.
Gradients = list[tuple[Array, Array]]


@dataclass
class LossGradient:
    grad_wrt_logits: Array  # (bs, class_count)

    def __post_init__(self) -> None:
        self.grad_wrt_logits = check_finite(self.grad_wrt_logits, "grad_wrt_logits")
        if self.grad_wrt_logits.ndim != 2:
            raise ValueError("grad_wrt_logits must be 2-D (batch x classes)")


@dataclass
class OptimizerState:
    learning_rate: float
    momentum: float
    buffers: Gradients = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be > 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")

    @classmethod
    def zeros(cls, params: ModelParameters, learning_rate: float, momentum: float) -> "OptimizerState":
        buffers = [
            (np.zeros_like(l.weight), np.zeros_like(l.bias)) for l in params.layers()
        ]
        return cls(learning_rate, momentum, buffers)


@dataclass
class ForwardCache:
    """Intermediates of one forward pass, consumed by the backward pass."""

    params: ModelParameters
    inputs: Array
    activations: list[Array]  # post-tanh per extractor layer; last entry = features
    logits: Array
    predictions: Array

    @property
    def features(self) -> Array:
        return self.activations[-1]


def init_model(
    input_dim: int,
    hidden_dims: Sequence[int],
    feature_dim: int,
    class_count: int,
    seed: int,
) -> ModelParameters:
    """Uniform fan-in initialization, reproducible from the seed."""
    if class_count < 2:
        raise ValueError("class_count must be >= 2")
    rng = np.random.default_rng(seed)
    sizes = [input_dim, *hidden_dims, feature_dim]
    extractor = []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        extractor.append(_init_layer(rng, fan_in, fan_out))
    classifier = _init_layer(rng, feature_dim, class_count)
    params = ModelParameters(extractor, classifier)
    params.validate()
    return params


def _init_layer(rng: np.random.Generator, fan_in: int, fan_out: int) -> Layer:
    bound = 1.0 / np.sqrt(fan_in)
    return Layer(
        rng.uniform(-bound, bound, size=(fan_in, fan_out)),
        rng.uniform(-bound, bound, size=fan_out),
    )


def forward_cached(params: ModelParameters, batch_inputs: Array) -> ForwardCache:
    x = check_finite(batch_inputs, "batch_inputs")
    if x.ndim != 2 or x.shape[1] != params.input_dim:
        raise ValueError(
            f"batch_inputs must be (bs, {params.input_dim}), got shape {x.shape}"
        )
    activations = []
    a = x
    for layer in params.extractor:
        a = np.tanh(a @ layer.weight + layer.bias)
        activations.append(a)
    logits = a @ params.classifier.weight + params.classifier.bias
    predictions = softmax_rows(logits)
    return ForwardCache(params, x, activations, logits, predictions)


def forward(params: ModelParameters, batch_inputs: Array) -> tuple[Array, Array]:
    """Return (features, predictions) for a batch."""
    cache = forward_cached(params, batch_inputs)
    return cache.features, cache.predictions


def backward_from_logit_grad(
    params: ModelParameters,
    cache: ForwardCache,
    grad: LossGradient,
) -> Gradients:
    """Exact reverse pass from d(loss)/d(logits) to every parameter tensor."""
    if cache.params is not params:
        raise ValueError("forward cache belongs to a different model instance")
    g = grad.grad_wrt_logits
    if g.shape != cache.logits.shape:
        raise ValueError(
            f"stale cache: grad shape {g.shape} does not match batch logits {cache.logits.shape}"
        )
    grads: Gradients = []
    features = cache.features
    d_wc = features.T @ g
    d_bc = g.sum(axis=0)
    d_a = g @ params.classifier.weight.T
    for i in range(len(params.extractor) - 1, -1, -1):
        act = cache.activations[i]
        d_s = d_a * (1.0 - act * act)  # tanh' = 1 - tanh^2
        prev = cache.inputs if i == 0 else cache.activations[i - 1]
        grads.append((prev.T @ d_s, d_s.sum(axis=0)))
        if i > 0:
            d_a = d_s @ params.extractor[i].weight.T
    grads.reverse()
    grads.append((d_wc, d_bc))
    return grads


def sgd_momentum_step(
    params: ModelParameters,
    grads: Gradients,
    state: OptimizerState,
) -> tuple[ModelParameters, OptimizerState]:
    """buffer <- momentum*buffer + grad; param <- param - lr*buffer (in place)."""
    layers = params.layers()
    if len(grads) != len(layers) or len(state.buffers) != len(layers):
        raise ValueError("gradient/buffer count does not match the layer count")
    for layer, (g_w, g_b), (m_w, m_b) in zip(layers, grads, state.buffers):
        if g_w.shape != layer.weight.shape or g_b.shape != layer.bias.shape:
            raise ValueError("gradient shapes do not mirror parameter shapes")
        m_w *= state.momentum
        m_w += g_w
        m_b *= state.momentum
        m_b += g_b
        layer.weight -= state.learning_rate * m_w
        layer.bias -= state.learning_rate * m_b
    return params, state


def cross_entropy_grad(
    logits: Array,
    labels: Array,
    label_smoothing: float = 0.0,
) -> tuple[float, Array]:
    """Mean label-smoothed cross-entropy and its gradient w.r.t. the logits."""
    bs, c = logits.shape
    targets = np.full((bs, c), label_smoothing / c)
    targets[np.arange(bs), labels] += 1.0 - label_smoothing
    log_p = log_softmax_rows(logits)
    loss = float(-(targets * log_p).sum() / bs)
    grad = (softmax_rows(logits) - targets) / bs
    return loss, grad


@dataclass
class PretrainReport:
    epoch_losses: list[float]
    train_accuracy: float  # percent
    val_accuracy: float | None  # percent, when a validation set was given


def source_pretrain(
    params: ModelParameters,
    labeled_source_data: data_mod.LabeledDataset,
    epochs: int,
    state: OptimizerState,
    batch_size: int = 64,
    seed: int = 0,
    label_smoothing: float = 0.1,
    val_data: data_mod.LabeledDataset | None = None,
) -> tuple[ModelParameters, PretrainReport]:
    """Supervised pre-training on the labelled source domain."""
    if labeled_source_data.size == 0:
        raise ValueError("source dataset is empty")
    if epochs < 0:
        raise ValueError("epochs must be >= 0")
    epoch_losses = []
    for epoch in range(epochs):
        losses = []
        for idx, rows in data_mod.batches(labeled_source_data, batch_size, seed, epoch):
            cache = forward_cached(params, rows)
            loss, grad_logits = cross_entropy_grad(
                cache.logits, labeled_source_data.labels[idx], label_smoothing
            )
            grads = backward_from_logit_grad(params, cache, LossGradient(grad_logits))
            sgd_momentum_step(params, grads, state)
            losses.append(loss)
        epoch_losses.append(float(np.mean(losses)))
    report = PretrainReport(
        epoch_losses=epoch_losses,
        train_accuracy=accuracy(params, labeled_source_data),
        val_accuracy=accuracy(params, val_data) if val_data is not None else None,
    )
    return params, report


def accuracy(params: ModelParameters, dataset: data_mod.LabeledDataset) -> float:
    """Argmax accuracy in percent."""
    _, preds = forward(params, dataset.inputs)
    return float(np.mean(preds.argmax(axis=1) == dataset.labels) * 100.0)


CHECKPOINT_FORMAT = "sigalign-checkpoint"
CHECKPOINT_VERSION = 1


def save_checkpoint(
    path: str | Path,
    params: ModelParameters,
    config_hash: str = "",
    extra: dict | None = None,
) -> None:
    """Versioned JSON checkpoint; float repr round-trips exactly."""
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config_hash": config_hash,
        "layer_shapes": [list(l.weight.shape) for l in params.layers()],
        "extractor": [
            {"weight": l.weight.tolist(), "bias": l.bias.tolist()} for l in params.extractor
        ],
        "classifier": {
            "weight": params.classifier.weight.tolist(),
            "bias": params.classifier.bias.tolist(),
        },
    }
    if extra:
        doc["extra"] = extra
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_checkpoint(path: str | Path) -> tuple[ModelParameters, dict]:
    """Load a checkpoint; returns the parameters and the metadata dict."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a {CHECKPOINT_FORMAT} document")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {doc.get('version')!r}")
    extractor = [
        Layer(np.array(l["weight"], dtype=np.float64), np.array(l["bias"], dtype=np.float64))
        for l in doc["extractor"]
    ]
    classifier = Layer(
        np.array(doc["classifier"]["weight"], dtype=np.float64),
        np.array(doc["classifier"]["bias"], dtype=np.float64),
    )
    params = ModelParameters(extractor, classifier)
    params.validate()
    meta = {k: doc.get(k) for k in ("config_hash", "extra", "version")}
    return params, meta
