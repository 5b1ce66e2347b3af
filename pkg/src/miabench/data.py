"""Synthetic mixtures, CIFAR-style binary and CSV loading, stratified four-way splits."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .nn import Dataset, STREAM_DATA, STREAM_MEANS, STREAM_SPLIT, make_dataset, make_rng


class FormatError(ValueError):
    """An input file violates its documented layout."""


@dataclass(frozen=True)
class SyntheticSpec:
    """Gaussian-mixture recipe: per-class isotropic blobs at seed-derived means."""

    num_classes: int
    dim: int
    per_class: int
    separation: float
    noise_std: float
    seed: int

    def __post_init__(self):
        if self.num_classes < 2 or self.dim < 1 or self.per_class < 1:
            raise ValueError("num_classes, dim and per_class must be positive")
        if self.separation < 0.0 or self.noise_std <= 0.0:
            raise ValueError("separation must be >= 0 and noise_std > 0")


@dataclass(frozen=True)
class FourWaySplit:
    """Disjoint member/non-member/shadow datasets with equal class proportions."""

    target_train: Dataset
    target_test: Dataset
    shadow_train: Dataset
    shadow_test: Dataset


def gen_gaussian_mixture(spec):
    """Per-class normal blobs; class c is centred at separation times a unit
    direction drawn deterministically from the seed."""
    mean_rng = make_rng(spec.seed, STREAM_MEANS)
    data_rng = make_rng(spec.seed, STREAM_DATA)
    feats, labels = [], []
    for c in range(spec.num_classes):
        direction = mean_rng.normal(size=spec.dim)
        norm = np.linalg.norm(direction)
        if norm > 0.0:
            direction = direction / norm
        centre = spec.separation * direction
        feats.append(centre + spec.noise_std
                     * data_rng.standard_normal((spec.per_class, spec.dim)))
        labels.append(np.full(spec.per_class, c, dtype=np.int64))
    return make_dataset(np.vstack(feats), np.concatenate(labels), spec.num_classes)


def split_pool(pool, train_per_class):
    """Slice one pool into default train/test parts, per class, in sample order.

    Both parts then share the class distribution exactly; used for synthetic
    pools where train and test must come from the same mixture."""
    train_idx, test_idx = [], []
    for c in range(pool.num_classes):
        idx = np.flatnonzero(pool.labels == c)
        if len(idx) <= train_per_class:
            raise ValueError(f"class {c} has no samples left for the test part")
        train_idx.append(idx[:train_per_class])
        test_idx.append(idx[train_per_class:])
    return (pool.subset(np.concatenate(train_idx)),
            pool.subset(np.concatenate(test_idx)))


def stratified_four_way(default_train, default_test, seed):
    """Per class, shuffle and halve both pools; odd counts favour the target part.

    If the two pools share id values, the test pool is re-keyed past the train
    pool's largest id so identities stay globally unique.
    """
    if default_train.num_classes != default_test.num_classes:
        raise ValueError("pools must share the class count")
    if set(default_train.ids) & set(default_test.ids):
        offset = int(default_train.ids.max()) + 1
        default_test = Dataset(default_test.features, default_test.labels,
                               default_test.num_classes, default_test.ids + offset)
    rng = make_rng(seed, STREAM_SPLIT)
    parts = {"tt": [], "st": [], "te": [], "se": []}
    for c in range(default_train.num_classes):
        train_idx = np.flatnonzero(default_train.labels == c)
        test_idx = np.flatnonzero(default_test.labels == c)
        if len(train_idx) == 0 or len(test_idx) == 0:
            raise ValueError(f"class {c} missing from one of the pools")
        order = rng.permutation(train_idx)
        cut = math.ceil(len(order) / 2)
        parts["tt"].append(order[:cut])
        parts["st"].append(order[cut:])
        order = rng.permutation(test_idx)
        cut = math.ceil(len(order) / 2)
        parts["te"].append(order[:cut])
        parts["se"].append(order[cut:])
    pick = lambda ds, key: ds.subset(np.concatenate(parts[key]))
    return FourWaySplit(target_train=pick(default_train, "tt"),
                        target_test=pick(default_test, "te"),
                        shadow_train=pick(default_train, "st"),
                        shadow_test=pick(default_test, "se"))


def load_cifar_binary(path, variant):
    """Decode the CIFAR binary layout: per record, label byte(s) then a 32x32x3
    image stored channel-major (R plane, G plane, B plane), pixels scaled to [0,1]."""
    if variant == "ten":
        record, label_col, classes = 3073, 0, 10
    elif variant == "hundred":
        record, label_col, classes = 3074, 1, 100  # coarse byte, then fine byte
    else:
        raise ValueError(f"unknown variant {variant!r}")
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from None
    if len(raw) % record != 0:
        offset = len(raw) - len(raw) % record
        raise FormatError(f"{path}: truncated record at byte {offset} "
                          f"({len(raw)} bytes is not a multiple of {record})")
    rows = np.frombuffer(raw, dtype=np.uint8).reshape(-1, record)
    labels = rows[:, label_col].astype(np.int64)
    bad = np.flatnonzero(labels >= classes)
    if len(bad) > 0:
        offset = int(bad[0]) * record + label_col
        raise FormatError(f"{path}: label {labels[bad[0]]} out of range "
                          f"at byte {offset}")
    features = rows[:, label_col + 1:].astype(np.float64) / 255.0
    return make_dataset(features, labels, classes)


def load_csv(path):
    """Rows of d numeric features and a final integer label; classes inferred."""
    feats, labels = [], []
    width = None
    try:
        fh = open(path, "r", encoding="ascii")
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from None
    with fh:
        for row, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if len(fields) < 2:
                raise FormatError(f"{path}: row {row}: need features and a label")
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                raise FormatError(f"{path}: row {row}: expected {width} fields, "
                                  f"got {len(fields)}")
            try:
                feats.append([float(v) for v in fields[:-1]])
                labels.append(int(fields[-1]))
            except ValueError:
                raise FormatError(f"{path}: row {row}: non-numeric field") from None
            if labels[-1] < 0:
                raise FormatError(f"{path}: row {row}: negative label")
    if not feats:
        return make_dataset(np.zeros((0, 0)), np.zeros(0, dtype=np.int64), 0)
    return make_dataset(np.array(feats), np.array(labels, dtype=np.int64),
                        max(labels) + 1)


def save_csv(path, dataset):
    """Write features then label per row; floats use repr so loads round-trip."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for i in range(len(dataset)):
            row = [repr(float(v)) for v in dataset.features[i]]
            row.append(str(int(dataset.labels[i])))
            fh.write(",".join(row) + "\n")
