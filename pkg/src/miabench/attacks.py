"""Membership-inference attacks: loss thresholds and a single-shadow-model classifier."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nn import (Dataset, MlpModel, batch_confidences, forward, loss, losses,
                 make_dataset)
from .optim import TrainConfig, constant_schedule, train

THRESHOLD_MODES = ("global", "per_class")


@dataclass(frozen=True)
class ThresholdModel:
    """Loss threshold(s): one global tau or one tau per class."""

    mode: str
    global_tau: float = 0.0
    per_class_tau: dict = field(default=None)

    def __post_init__(self):
        if self.mode not in THRESHOLD_MODES:
            raise ValueError(f"unknown threshold mode {self.mode!r}")
        if self.mode == "per_class" and not self.per_class_tau:
            raise ValueError("per_class mode needs a class-to-tau map")


@dataclass(frozen=True)
class ShadowAttackModel:
    """Binary classifier over the k largest confidences of the target's output."""

    feature_count: int
    classifier: MlpModel


@dataclass(frozen=True)
class AttackEvaluation:
    """FPR over non-members, FNR over members, and their average P_err."""

    fpr: float
    fnr: float
    p_err: float
    member_decisions: dict
    nonmember_decisions: dict

    def __post_init__(self):
        for rate in (self.fpr, self.fnr):
            if not 0.0 <= rate <= 1.0:
                raise ValueError("rates must lie in [0, 1]")
        if abs(self.p_err - (self.fpr + self.fnr) / 2.0) > 1e-12:
            raise ValueError("p_err must equal (fpr + fnr) / 2")
        if set(self.member_decisions) & set(self.nonmember_decisions):
            raise ValueError("member and non-member ids must be disjoint")

    @property
    def per_sample_decisions(self):
        merged = dict(self.member_decisions)
        merged.update(self.nonmember_decisions)
        return merged


def fit_threshold(model, train_set, mode="global"):
    """Mean training loss as the threshold, overall or per class."""
    if len(train_set) == 0:
        raise ValueError("empty training set")
    vals = losses(model, train_set)
    if mode == "global":
        return ThresholdModel("global", float(vals.mean()))
    if mode == "per_class":
        taus = {}
        for c in range(train_set.num_classes):
            picked = vals[train_set.labels == c]
            if len(picked) == 0:
                raise ValueError(f"class {c} has no training samples")
            taus[c] = float(picked.mean())
        return ThresholdModel("per_class", 0.0, taus)
    raise ValueError(f"unknown threshold mode {mode!r}")


def threshold_decide(tm, model, sample):
    """Member (1) iff the sample's loss is strictly below tau; ties are non-member."""
    tau = tm.global_tau if tm.mode == "global" else tm.per_class_tau[sample.label]
    return int(loss(model, sample) < tau)


class ThresholdDecider:
    """Callable decision rule wrapping a fitted ThresholdModel."""

    def __init__(self, tm):
        self.tm = tm

    def __call__(self, model, sample):
        return threshold_decide(self.tm, model, sample)

    def decide_batch(self, model, dataset):
        vals = losses(model, dataset)
        if self.tm.mode == "global":
            taus = self.tm.global_tau
        else:
            taus = np.array([self.tm.per_class_tau[int(c)] for c in dataset.labels])
        return (vals < taus).astype(np.int64)


def top_k_confidences(confidences, k):
    """The k largest entries of each confidence row, sorted descending."""
    conf = np.asarray(confidences, dtype=np.float64)
    return -np.sort(-conf, axis=-1)[..., :k]


def train_shadow_attack(shadow_train, shadow_test, target_arch, target_config,
                        k=3, attack_train_config=None):
    """Train one shadow model with the target's own recipe, then the attack classifier.

    The attack dataset pairs each shadow sample's sorted top-k confidences with
    its membership bit (1 for shadow_train rows, 0 for shadow_test rows).
    """
    if len(shadow_train) == 0 or len(shadow_test) == 0:
        raise ValueError("shadow sets must be non-empty")
    if shadow_train.num_classes != shadow_test.num_classes:
        raise ValueError("shadow sets must share the class count")
    if not 1 <= k <= shadow_train.num_classes:
        raise ValueError("k must lie in [1, num_classes]")
    shadow = train(shadow_train, target_arch, target_config)[-1].model
    feats = np.vstack([
        top_k_confidences(batch_confidences(shadow, shadow_train.features), k),
        top_k_confidences(batch_confidences(shadow, shadow_test.features), k),
    ])
    labels = np.concatenate([np.ones(len(shadow_train), dtype=np.int64),
                             np.zeros(len(shadow_test), dtype=np.int64)])
    attack_ds = make_dataset(feats, labels, 2)
    if attack_train_config is None:
        attack_train_config = TrainConfig(
            variant="sgd", schedule=constant_schedule(0.1, 50),
            batch_size=min(32, len(attack_ds)), epochs=50,
            seed=target_config.seed)
    classifier = train(attack_ds, (k, 64, 2), attack_train_config)[-1].model
    return ShadowAttackModel(k, classifier)


def nn_decide(am, target_model, sample):
    """Member (1) iff the attack classifier's member confidence exceeds 0.5."""
    conf = forward(target_model, sample.features)
    feats = top_k_confidences(conf, am.feature_count)
    return int(forward(am.classifier, feats)[1] > 0.5)


class NnDecider:
    """Callable decision rule wrapping a trained ShadowAttackModel."""

    def __init__(self, am):
        self.am = am

    def __call__(self, model, sample):
        return nn_decide(self.am, model, sample)

    def decide_batch(self, model, dataset):
        feats = top_k_confidences(batch_confidences(model, dataset.features),
                                  self.am.feature_count)
        probs = batch_confidences(self.am.classifier, feats)
        return (probs[:, 1] > 0.5).astype(np.int64)


def _decisions(decide, model, dataset):
    batch = getattr(decide, "decide_batch", None)
    if batch is not None:
        return np.asarray(batch(model, dataset), dtype=np.int64)
    return np.array([int(decide(model, dataset.sample(i)))
                     for i in range(len(dataset))], dtype=np.int64)


def evaluate_attack(decide, model, members, nonmembers):
    """FPR on non-members, FNR on members, P_err, and per-sample decisions."""
    if len(members) == 0 or len(nonmembers) == 0:
        raise ValueError("members and nonmembers must be non-empty")
    member_bits = _decisions(decide, model, members)
    nonmember_bits = _decisions(decide, model, nonmembers)
    fnr = float(np.mean(member_bits == 0))
    fpr = float(np.mean(nonmember_bits == 1))
    return AttackEvaluation(
        fpr=fpr, fnr=fnr, p_err=(fpr + fnr) / 2.0,
        member_decisions={int(i): int(b) for i, b in zip(members.ids, member_bits)},
        nonmember_decisions={int(i): int(b)
                             for i, b in zip(nonmembers.ids, nonmember_bits)})
