"""Experiment config files: INI syntax, strict keys, mapped onto domain objects."""

from __future__ import annotations

import configparser
from dataclasses import dataclass

from .data import (SyntheticSpec, gen_gaussian_mixture, load_csv, split_pool,
                   stratified_four_way)
from .optim import LrSchedule, TrainConfig, constant_schedule


class ConfigError(ValueError):
    """A config file is unparseable or violates the documented schema."""


@dataclass(frozen=True)
class SyntheticSource:
    classes: int
    dim: int
    train_per_class: int
    test_per_class: int
    separation: float
    noise_std: float
    seed: int


@dataclass(frozen=True)
class CsvSource:
    train: str
    test: str
    seed: int


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything `experiment` needs: data source, architecture, recipe, outputs."""

    source: object
    hidden: tuple
    train: TrainConfig
    attacks: tuple
    top_k: int
    attack_train_epochs: int
    repetitions: int
    outdir: str
    delta: float


_SCHEMA = {
    "dataset": {"kind", "classes", "dim", "train_per_class", "test_per_class",
                "separation", "noise_std", "train", "test", "seed"},
    "model": {"hidden", "dropout"},
    "train": {"variant", "epochs", "batch_size", "base_rate", "schedule",
              "clip", "sigma", "rho", "l2", "seed"},
    "attacks": {"select", "top_k", "train_epochs"},
    "experiment": {"repetitions", "outdir", "delta"},
}


def _check_schema(cp):
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key in cp[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
    for required in ("dataset", "train", "experiment"):
        if not cp.has_section(required):
            raise ConfigError(f"missing section [{required}]")


def _get(cp, section, key, cast, default=None, required=False):
    if not cp.has_option(section, key):
        if required:
            raise ConfigError(f"missing key {key!r} in section [{section}]")
        return default
    raw = cp.get(section, key).strip()
    try:
        return cast(raw)
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for {key!r} in [{section}]") from None


def _int_tuple(raw):
    raw = raw.strip()
    if not raw:
        return ()
    return tuple(int(part) for part in raw.split(","))


def _schedule_segments(raw):
    segments = []
    for part in raw.split(","):
        count, _, mult = part.partition(":")
        if not mult:
            raise ValueError(raw)
        segments.append((int(count), float(mult)))
    return tuple(segments)


def _names(raw):
    return tuple(name.strip() for name in raw.split(",") if name.strip())


def parse_config(path):
    """Read and validate an experiment config; raises ConfigError on any defect."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except configparser.Error as exc:
        # configparser reports offending line numbers in its message
        raise ConfigError(f"{path}: {exc}") from None
    _check_schema(cp)

    kind = _get(cp, "dataset", "kind", str, required=True)
    seed = _get(cp, "dataset", "seed", int, default=0)
    if kind == "synthetic":
        for key in ("train", "test"):
            if cp.has_option("dataset", key):
                raise ConfigError(f"key {key!r} is only valid for kind = csv")
        source = SyntheticSource(
            classes=_get(cp, "dataset", "classes", int, required=True),
            dim=_get(cp, "dataset", "dim", int, required=True),
            train_per_class=_get(cp, "dataset", "train_per_class", int, required=True),
            test_per_class=_get(cp, "dataset", "test_per_class", int, required=True),
            separation=_get(cp, "dataset", "separation", float, required=True),
            noise_std=_get(cp, "dataset", "noise_std", float, required=True),
            seed=seed)
    elif kind == "csv":
        for key in ("classes", "dim", "train_per_class", "test_per_class",
                    "separation", "noise_std"):
            if cp.has_option("dataset", key):
                raise ConfigError(f"key {key!r} is only valid for kind = synthetic")
        source = CsvSource(train=_get(cp, "dataset", "train", str, required=True),
                           test=_get(cp, "dataset", "test", str, required=True),
                           seed=seed)
    else:
        raise ConfigError(f"unknown dataset kind {kind!r}")

    hidden = _get(cp, "model", "hidden", _int_tuple, default=()) \
        if cp.has_section("model") else ()
    dropout = _get(cp, "model", "dropout", float, default=0.0) \
        if cp.has_section("model") else 0.0

    epochs = _get(cp, "train", "epochs", int, required=True)
    base_rate = _get(cp, "train", "base_rate", float, default=0.01)
    segments = _get(cp, "train", "schedule", _schedule_segments,
                    default=((epochs, 1.0),))
    try:
        schedule = LrSchedule(base_rate, segments)
        train = TrainConfig(
            variant=_get(cp, "train", "variant", str, required=True),
            schedule=schedule,
            batch_size=_get(cp, "train", "batch_size", int, required=True),
            epochs=epochs,
            seed=_get(cp, "train", "seed", int, default=0),
            clip_threshold=_get(cp, "train", "clip", float),
            noise_multiplier=_get(cp, "train", "sigma", float, default=0.0),
            sam_radius=_get(cp, "train", "rho", float),
            l2_coeff=_get(cp, "train", "l2", float, default=0.0),
            dropout_rate=dropout)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    attacks = _names(_get(cp, "attacks", "select", str, default="threshold")) \
        if cp.has_section("attacks") else ("threshold",)
    top_k = _get(cp, "attacks", "top_k", int, default=3) \
        if cp.has_section("attacks") else 3
    attack_train_epochs = _get(cp, "attacks", "train_epochs", int, default=50) \
        if cp.has_section("attacks") else 50

    config = ExperimentConfig(
        source=source, hidden=hidden, train=train, attacks=attacks, top_k=top_k,
        attack_train_epochs=attack_train_epochs,
        repetitions=_get(cp, "experiment", "repetitions", int, default=10),
        outdir=_get(cp, "experiment", "outdir", str, required=True),
        delta=_get(cp, "experiment", "delta", float, default=1e-5))
    if config.repetitions < 1:
        raise ConfigError("repetitions must be >= 1")
    if not config.attacks:
        raise ConfigError("attack selection is empty")
    return config


def build_split(config):
    """Materialize the config's data source into a stratified four-way split.

    A synthetic source draws one pool so train and test share the class means,
    then slices it per class before the four-way split."""
    src = config.source
    if isinstance(src, SyntheticSource):
        pool = gen_gaussian_mixture(SyntheticSpec(
            src.classes, src.dim, src.train_per_class + src.test_per_class,
            src.separation, src.noise_std, src.seed))
        default_train, default_test = split_pool(pool, src.train_per_class)
        return stratified_four_way(default_train, default_test, src.seed + 1)
    default_train = load_csv(src.train)
    default_test = load_csv(src.test)
    return stratified_four_way(default_train, default_test, src.seed)
