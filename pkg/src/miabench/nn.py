"""Minimal dense feed-forward classifier: forward, loss, exact per-sample gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Rng = np.random.Generator

# Substream tags: every random purpose gets its own generator derived from
# (seed, tag) so adding draws to one purpose never shifts another.
STREAM_INIT = 0
STREAM_STEP = 1
STREAM_SHUFFLE = 2
STREAM_SPLIT = 3
STREAM_MEANS = 4
STREAM_DATA = 5

# Clamp before the log so degenerate overfit models keep finite loss.
MIN_CONFIDENCE = 1e-300


def make_rng(seed, *stream):
    """Deterministic generator; trailing integers select independent substreams."""
    mask = (1 << 64) - 1
    return np.random.default_rng([int(seed) & mask] + [int(s) & mask for s in stream])


@dataclass(frozen=True)
class Sample:
    """One labelled example, the unit of membership."""

    features: np.ndarray
    label: int


@dataclass(frozen=True)
class Dataset:
    """Feature matrix (n, d), integer labels in [0, num_classes), unique sample ids."""

    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    ids: np.ndarray

    def __post_init__(self):
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-d array")
        n = self.features.shape[0]
        if self.labels.shape != (n,) or self.ids.shape != (n,):
            raise ValueError("labels and ids must match the sample count")
        if n and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError("labels must lie in [0, num_classes)")
        if len(np.unique(self.ids)) != n:
            raise ValueError("sample ids must be unique")

    def __len__(self):
        return self.features.shape[0]

    @property
    def dim(self):
        return self.features.shape[1]

    def sample(self, i):
        return Sample(self.features[i], int(self.labels[i]))

    def subset(self, indexes):
        indexes = np.asarray(indexes)
        if indexes.dtype.kind not in "biu":
            indexes = indexes.astype(np.int64)
        return Dataset(self.features[indexes], self.labels[indexes],
                       self.num_classes, self.ids[indexes])


def make_dataset(features, labels, num_classes, ids=None):
    """Build a Dataset from array-likes; ids default to 0..n-1."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 1:
        features = features.reshape(len(features), 1)
    labels = np.asarray(labels, dtype=np.int64)
    if ids is None:
        ids = np.arange(features.shape[0], dtype=np.int64)
    else:
        ids = np.asarray(ids, dtype=np.int64)
    return Dataset(features, labels, int(num_classes), ids)


@dataclass(frozen=True)
class MlpModel:
    """ReLU MLP with softmax output; weights[l] maps layer_dims[l] to layer_dims[l+1]."""

    layer_dims: tuple
    weights: tuple
    biases: tuple
    dropout_rate: float = 0.0

    def __post_init__(self):
        dims = tuple(int(d) for d in self.layer_dims)
        if len(dims) < 2 or any(d < 1 for d in dims):
            raise ValueError("layer_dims needs at least two positive entries")
        if len(self.weights) != len(dims) - 1 or len(self.biases) != len(dims) - 1:
            raise ValueError("one weight matrix and bias vector per layer")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (dims[l], dims[l + 1]) or b.shape != (dims[l + 1],):
                raise ValueError("weight shapes must chain consecutive layer dims")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValueError("model values must be finite")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        object.__setattr__(self, "layer_dims", dims)

    @property
    def num_classes(self):
        return self.layer_dims[-1]

    @property
    def num_params(self):
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))


@dataclass(frozen=True)
class Gradient:
    """Per-layer weight and bias gradients, shape-congruent with a model."""

    weights: tuple
    biases: tuple

    def __post_init__(self):
        for arr in self.weights + self.biases:
            if not np.isfinite(arr).all():
                raise ValueError("gradient values must be finite")


def init_model(layer_dims, dropout_rate, seed):
    """He-scaled normal weights (std sqrt(2/fan_in)), zero biases, layer-major draws."""
    dims = tuple(int(d) for d in layer_dims)
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise ValueError("layer_dims needs at least two positive entries")
    rng = make_rng(seed, STREAM_INIT)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(dims, tuple(weights), tuple(biases), float(dropout_rate))


def _softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=-1, keepdims=True)
    return np.maximum(p, MIN_CONFIDENCE)


def _dropout_mask(rate, shape, rng):
    # Inverted scaling: surviving activations divided by the keep probability.
    if rng is None:
        raise ValueError("training-mode dropout needs an rng")
    keep = rng.random(shape) >= rate
    return keep / (1.0 - rate)


def _forward_arrays(model, x, train_mode, rng):
    """Run the net on a batch; returns (activations, pre-activations, mask, probs).

    activations[l] is the input to layer l, post-dropout where it applies; the
    mask covers the pre-output activations only (the last hidden layer).
    """
    layers = len(model.weights)
    acts = [x]
    zs = []
    mask = None
    a = x
    for l in range(layers):
        z = a @ model.weights[l] + model.biases[l]
        zs.append(z)
        if l < layers - 1:
            a = np.maximum(z, 0.0)
            if l == layers - 2 and train_mode and model.dropout_rate > 0.0:
                mask = _dropout_mask(model.dropout_rate, a.shape, rng)
                a = a * mask
            acts.append(a)
        else:
            a = z
    return acts, zs, mask, _softmax(zs[-1])


def forward(model, features, train_mode=False, rng=None):
    """Confidence vector over classes for one feature vector."""
    features = np.asarray(features, dtype=np.float64)
    if features.shape != (model.layer_dims[0],):
        raise ValueError("feature vector length must equal the input dimension")
    _, _, _, probs = _forward_arrays(model, features[None, :], train_mode, rng)
    return probs[0]


def batch_confidences(model, features):
    """Eval-mode confidences for a feature matrix, one row per sample."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != model.layer_dims[0]:
        raise ValueError("feature matrix width must equal the input dimension")
    _, _, _, probs = _forward_arrays(model, features, False, None)
    return probs


def loss(model, sample):
    """Cross-entropy of the true class, clamped to stay finite."""
    probs = forward(model, sample.features)
    if not 0 <= sample.label < model.num_classes:
        raise ValueError("label out of range")
    return float(-np.log(probs[sample.label]))


def losses(model, dataset):
    """Per-sample cross-entropy over a dataset."""
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    probs = batch_confidences(model, dataset.features)
    true = probs[np.arange(len(dataset)), dataset.labels]
    return -np.log(true)


def _stack(batch):
    if isinstance(batch, Dataset):
        if len(batch) == 0:
            raise ValueError("empty batch")
        return batch.features, batch.labels
    samples = list(batch)
    if not samples:
        raise ValueError("empty batch")
    x = np.stack([np.asarray(s.features, dtype=np.float64) for s in samples])
    y = np.array([s.label for s in samples], dtype=np.int64)
    return x, y


def grads_arrays(weights, biases, x, y, mask=None):
    """Per-sample cross-entropy gradients as stacked arrays.

    weights[l] may be (in, out) shared across the batch or (b, in, out) with one
    matrix per sample (used by the per-sample SAM pass). Returns (gw, gb) where
    gw[l] is (b, in, out) and gb[l] is (b, out). mask, when given, is the
    inverted-dropout mask applied to the pre-output activations.
    """
    layers = len(weights)
    batched = weights[0].ndim == 3

    def apply(a, w):
        return np.einsum("bi,bio->bo", a, w) if batched else a @ w

    def back(delta, w):
        return np.einsum("bo,bio->bi", delta, w) if batched else delta @ w.T

    acts = [x]
    zs = []
    a = x
    for l in range(layers):
        z = apply(a, weights[l]) + biases[l]
        zs.append(z)
        if l < layers - 1:
            a = np.maximum(z, 0.0)
            if l == layers - 2 and mask is not None:
                a = a * mask
            acts.append(a)
    probs = _softmax(zs[-1])
    delta = probs.copy()
    delta[np.arange(x.shape[0]), y] -= 1.0
    gw = [None] * layers
    gb = [None] * layers
    for l in reversed(range(layers)):
        gw[l] = np.einsum("bi,bo->bio", acts[l], delta)
        gb[l] = delta
        if l > 0:
            da = back(delta, weights[l])
            if l - 1 == layers - 2 and mask is not None:
                da = da * mask
            delta = da * (zs[l - 1] > 0.0)
    return gw, gb


def _batch_grads(model, batch, rng, train_mode):
    x, y = _stack(batch)
    mask = None
    if train_mode and model.dropout_rate > 0.0 and len(model.weights) > 1:
        hidden = model.layer_dims[-2]
        mask = _dropout_mask(model.dropout_rate, (x.shape[0], hidden), rng)
    return grads_arrays(model.weights, model.biases, x, y, mask)


def batch_gradient(model, batch, rng=None, train_mode=True):
    """Average of the per-sample cross-entropy gradients over a batch."""
    gw, gb = _batch_grads(model, batch, rng, train_mode)
    return Gradient(tuple(g.mean(axis=0) for g in gw),
                    tuple(g.mean(axis=0) for g in gb))


def per_sample_gradients(model, batch, rng=None, train_mode=True):
    """Gradient of each sample's own loss, in batch order."""
    gw, gb = _batch_grads(model, batch, rng, train_mode)
    count = gw[0].shape[0]
    return [Gradient(tuple(g[i] for g in gw), tuple(g[i] for g in gb))
            for i in range(count)]


def test_accuracy(model, dataset):
    """Fraction of samples whose argmax confidence is the label (ties: lowest index)."""
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    probs = batch_confidences(model, dataset.features)
    return float(np.mean(probs.argmax(axis=1) == dataset.labels))
