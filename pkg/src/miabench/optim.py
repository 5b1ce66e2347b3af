"""SGD, SAM, DP-SGD and DP-SAM training with a step-decay learning-rate schedule."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .data import FormatError
from .nn import (Gradient, MlpModel, _batch_grads, _dropout_mask, _stack,
                 STREAM_SHUFFLE, STREAM_STEP, grads_arrays, init_model, make_rng)

VARIANTS = ("sgd", "sam", "dp-sgd", "dp-sam")

CHECKPOINT_MAGIC = b"MIAB"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class LrSchedule:
    """Base rate and (epoch_count, multiplier) segments covering the whole run."""

    base_rate: float
    segments: tuple

    def __post_init__(self):
        if self.base_rate <= 0.0:
            raise ValueError("base_rate must be positive")
        segs = tuple((int(c), float(m)) for c, m in self.segments)
        if not segs or any(c < 1 or m <= 0.0 for c, m in segs):
            raise ValueError("segments need positive epoch counts and multipliers")
        object.__setattr__(self, "segments", segs)

    @property
    def total_epochs(self):
        return sum(c for c, _ in self.segments)


def constant_schedule(base_rate, epochs):
    """Single-segment schedule holding base_rate for the whole run."""
    return LrSchedule(base_rate, ((epochs, 1.0),))


def lr_at_epoch(schedule, epoch):
    """Learning rate for a 1-based epoch index."""
    if epoch < 1 or epoch > schedule.total_epochs:
        raise ValueError("epoch outside the schedule range")
    seen = 0
    for count, mult in schedule.segments:
        seen += count
        if epoch <= seen:
            return schedule.base_rate * mult
    raise AssertionError("unreachable")


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer variant plus every knob a run needs; seeds fix all randomness."""

    variant: str
    schedule: LrSchedule
    batch_size: int
    epochs: int
    seed: int
    clip_threshold: float = None
    noise_multiplier: float = 0.0
    sam_radius: float = None
    l2_coeff: float = 0.0
    dropout_rate: float = 0.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be positive")
        if self.schedule.total_epochs != self.epochs:
            raise ValueError("schedule segments must sum to the epoch count")
        if self.variant in ("dp-sgd", "dp-sam"):
            if self.clip_threshold is None or self.clip_threshold <= 0.0:
                raise ValueError(f"{self.variant} requires a positive clip_threshold")
        if self.variant in ("sam", "dp-sam"):
            if self.sam_radius is None or self.sam_radius <= 0.0:
                raise ValueError(f"{self.variant} requires a positive sam_radius")
        if self.noise_multiplier < 0.0 or self.l2_coeff < 0.0:
            raise ValueError("noise_multiplier and l2_coeff must be non-negative")


@dataclass(frozen=True)
class Checkpoint:
    """Model snapshot taken after a completed 1-based epoch."""

    epoch_index: int
    model: MlpModel


def global_norm(gradient):
    """L2 norm over every layer's weights and biases jointly."""
    total = 0.0
    for arr in gradient.weights + gradient.biases:
        total += float(np.sum(arr * arr))
    return float(np.sqrt(total))


def clip(gradient, c):
    """Rescale to global norm c when the norm exceeds c; otherwise unchanged."""
    if c <= 0.0:
        raise ValueError("clip threshold must be positive")
    norm = global_norm(gradient)
    if norm <= c:
        return gradient
    factor = c / norm
    return Gradient(tuple(w * factor for w in gradient.weights),
                    tuple(b * factor for b in gradient.biases))


def sam_perturbation(gradient, rho):
    """Ascent direction e = rho * g / ||g||; zero gradient gives zero perturbation."""
    if rho <= 0.0:
        raise ValueError("rho must be positive")
    norm = global_norm(gradient)
    if norm == 0.0:
        return Gradient(tuple(np.zeros_like(w) for w in gradient.weights),
                        tuple(np.zeros_like(b) for b in gradient.biases))
    factor = rho / norm
    return Gradient(tuple(w * factor for w in gradient.weights),
                    tuple(b * factor for b in gradient.biases))


def _stack_norms(gw, gb):
    # Per-sample global norms across all layers; gw[l] is (b, in, out).
    sq = sum(np.sum(g * g, axis=(1, 2)) for g in gw)
    sq = sq + sum(np.sum(g * g, axis=1) for g in gb)
    return np.sqrt(sq)


def _clip_stacks(gw, gb, c):
    norms = _stack_norms(gw, gb)
    factors = np.where(norms > c, c / np.maximum(norms, 1e-300), 1.0)
    gw = [g * factors[:, None, None] for g in gw]
    gb = [g * factors[:, None] for g in gb]
    return gw, gb


def _mean_stacks(gw, gb):
    return [g.mean(axis=0) for g in gw], [g.mean(axis=0) for g in gb]


def _shifted(model, direction, scale=1.0):
    return MlpModel(model.layer_dims,
                    tuple(w + scale * d for w, d in zip(model.weights, direction.weights)),
                    tuple(b + scale * d for b, d in zip(model.biases, direction.biases)),
                    model.dropout_rate)


def step(model, batch, config, epoch, rng):
    """One update on one batch; returns the new model, never mutates the old."""
    lr = lr_at_epoch(config.schedule, epoch)
    variant = config.variant

    if variant == "sgd":
        gw, gb = _batch_grads(model, batch, rng, True)
        mw, mb = _mean_stacks(gw, gb)
    elif variant == "sam":
        gw1, gb1 = _batch_grads(model, batch, rng, True)
        g1 = Gradient(tuple(g.mean(axis=0) for g in gw1),
                      tuple(g.mean(axis=0) for g in gb1))
        e = sam_perturbation(g1, config.sam_radius)
        gw, gb = _batch_grads(_shifted(model, e), batch, rng, True)
        mw, mb = _mean_stacks(gw, gb)
    elif variant == "dp-sgd":
        gw, gb = _batch_grads(model, batch, rng, True)
        gw, gb = _clip_stacks(gw, gb, config.clip_threshold)
        mw, mb = _mean_stacks(gw, gb)
    elif variant == "dp-sam":
        x, y = _stack(batch)
        gw1, gb1 = _batch_grads(model, batch, rng, True)
        norms = _stack_norms(gw1, gb1)
        factors = np.where(norms > 0.0, config.sam_radius / np.maximum(norms, 1e-300), 0.0)
        pw = [w[None, :, :] + g * factors[:, None, None]
              for w, g in zip(model.weights, gw1)]
        pb = [b[None, :] + g * factors[:, None]
              for b, g in zip(model.biases, gb1)]
        mask = None
        if model.dropout_rate > 0.0 and len(model.weights) > 1:
            mask = _dropout_mask(model.dropout_rate,
                                 (x.shape[0], model.layer_dims[-2]), rng)
        gw, gb = grads_arrays(pw, pb, x, y, mask)
        gw, gb = _clip_stacks(gw, gb, config.clip_threshold)
        mw, mb = _mean_stacks(gw, gb)
    else:
        raise ValueError(f"unknown variant {variant!r}")

    if variant in ("dp-sgd", "dp-sam") and config.noise_multiplier > 0.0:
        # Gaussian noise on the averaged gradient, std sigma*C per coordinate;
        # draws consume the rng layer-major, weights before bias.
        scale = config.noise_multiplier * config.clip_threshold
        for l in range(len(mw)):
            mw[l] = mw[l] + rng.normal(0.0, scale, size=mw[l].shape)
            mb[l] = mb[l] + rng.normal(0.0, scale, size=mb[l].shape)

    if config.l2_coeff > 0.0:
        mw = [g + config.l2_coeff * w for g, w in zip(mw, model.weights)]
        mb = [g + config.l2_coeff * b for g, b in zip(mb, model.biases)]

    return MlpModel(model.layer_dims,
                    tuple(w - lr * g for w, g in zip(model.weights, mw)),
                    tuple(b - lr * g for b, g in zip(model.biases, mb)),
                    model.dropout_rate)


def train(dataset, arch, config):
    """Full training run: one checkpoint per epoch, deterministic per seed."""
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    if config.batch_size > len(dataset):
        raise ValueError("batch_size exceeds the dataset size")
    arch = tuple(int(d) for d in arch)
    if arch[0] != dataset.dim or arch[-1] != dataset.num_classes:
        raise ValueError("architecture endpoints must match the dataset")
    model = init_model(arch, config.dropout_rate, config.seed)
    shuffle_rng = make_rng(config.seed, STREAM_SHUFFLE)
    step_rng = make_rng(config.seed, STREAM_STEP)
    n = len(dataset)
    checkpoints = []
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = dataset.subset(order[start:start + config.batch_size])
            model = step(model, batch, config, epoch, step_rng)
        checkpoints.append(Checkpoint(epoch, model))
    return checkpoints


def save_model(path, model):
    """Write the MIAB checkpoint format.

    Layout, all little-endian: magic "MIAB", u32 format version, u32 count of
    layer dims, the dims as u32, then every layer's weight matrix (row-major)
    followed by its bias vector as f64, in layer order.
    """
    buf = bytearray()
    buf += CHECKPOINT_MAGIC
    buf += struct.pack("<II", CHECKPOINT_VERSION, len(model.layer_dims))
    buf += struct.pack(f"<{len(model.layer_dims)}I", *model.layer_dims)
    for w, b in zip(model.weights, model.biases):
        buf += np.ascontiguousarray(w, dtype="<f8").tobytes()
        buf += np.ascontiguousarray(b, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(bytes(buf))


def load_model(path):
    """Read a MIAB checkpoint back into a model (dropout is not serialized)."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from None
    if raw[:4] != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: not a MIAB checkpoint")
    try:
        version, ndims = struct.unpack_from("<II", raw, 4)
        if version != CHECKPOINT_VERSION:
            raise FormatError(f"{path}: unsupported checkpoint version {version}")
        dims = struct.unpack_from(f"<{ndims}I", raw, 12)
        off = 12 + 4 * ndims
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            w = np.frombuffer(raw, dtype="<f8", count=fan_in * fan_out, offset=off)
            off += 8 * fan_in * fan_out
            b = np.frombuffer(raw, dtype="<f8", count=fan_out, offset=off)
            off += 8 * fan_out
            weights.append(w.reshape(fan_in, fan_out).copy())
            biases.append(b.copy())
        if off != len(raw):
            raise FormatError(f"{path}: trailing bytes after offset {off}")
        return MlpModel(tuple(dims), tuple(weights), tuple(biases), 0.0)
    except FormatError:
        raise
    except (struct.error, ValueError) as exc:
        raise FormatError(f"{path}: malformed checkpoint ({exc})") from None
