"""Repeated seeded runs, per-epoch measurement, CI aggregation, outliers, dominance."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .attacks import (NnDecider, ThresholdDecider, evaluate_attack,
                      fit_threshold, train_shadow_attack)
from .nn import test_accuracy
from .optim import TrainConfig, constant_schedule, train
from .privacy import DEFAULT_ORDERS, epsilon_schedule

ATTACK_NAMES = ("threshold", "per-class", "nn")


@dataclass(frozen=True)
class EpochRecord:
    """One epoch of one run: utility, accounted epsilon, per-attack evaluation."""

    epoch: int
    test_accuracy: float
    epsilon: float
    attacks: dict

    def __post_init__(self):
        if not 0.0 <= self.test_accuracy <= 1.0:
            raise ValueError("test_accuracy must lie in [0, 1]")


@dataclass(frozen=True)
class FrontierPoint:
    """Cross-run mean accuracy and P_err at one epoch with 95% CI half-widths."""

    epoch: int
    mean_accuracy: float
    ci_accuracy: float
    mean_p_err: float
    ci_p_err: float
    run_count: int

    def __post_init__(self):
        if self.ci_accuracy < 0.0 or self.ci_p_err < 0.0 or self.run_count < 1:
            raise ValueError("half-widths must be >= 0 and run_count >= 1")


@dataclass(frozen=True)
class OutlierReport:
    """Samples the attack decided correctly in every run, per population."""

    member_outlier_fraction: float
    nonmember_outlier_fraction: float
    average_fraction: float
    member_outlier_ids: tuple
    nonmember_outlier_ids: tuple

    def __post_init__(self):
        mean = (self.member_outlier_fraction + self.nonmember_outlier_fraction) / 2.0
        if abs(self.average_fraction - mean) > 1e-12:
            raise ValueError("average_fraction must average the two populations")


def run_experiment(split, arch, config, attacks=("threshold",), repetitions=10,
                   delta=1e-5, top_k=3, attack_epochs=50,
                   order_grid=DEFAULT_ORDERS, on_checkpoint=None):
    """R seeded runs; run r trains with seed base+r and measures every checkpoint.

    Threshold attacks are refitted on the members at each checkpoint; the
    shadow-model attack is trained once per run on the shadow halves and then
    applied to every checkpoint. on_checkpoint(run_index, checkpoint), when
    given, is called for every checkpoint as it is produced.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    for name in attacks:
        if name not in ATTACK_NAMES:
            raise ValueError(f"unknown attack {name!r}")
    members, nonmembers = split.target_train, split.target_test
    steps_per_epoch = math.ceil(len(members) / config.batch_size)
    if config.variant in ("dp-sgd", "dp-sam") and config.noise_multiplier > 0.0:
        epsilons = epsilon_schedule(config.batch_size / len(members),
                                    config.noise_multiplier, steps_per_epoch,
                                    config.epochs, delta, order_grid)
    else:
        epsilons = [math.inf] * config.epochs

    runs = []
    for r in range(1, repetitions + 1):
        run_config = replace(config, seed=config.seed + r)
        checkpoints = train(members, arch, run_config)
        if on_checkpoint is not None:
            for ck in checkpoints:
                on_checkpoint(r, ck)
        nn_decider = None
        if "nn" in attacks:
            am = train_shadow_attack(split.shadow_train, split.shadow_test,
                                     arch, run_config, top_k,
                                     _attack_config(run_config, attack_epochs,
                                                    split))
            nn_decider = NnDecider(am)
        records = []
        for ck in checkpoints:
            evals = {}
            for name in attacks:
                if name == "threshold":
                    decider = ThresholdDecider(fit_threshold(ck.model, members,
                                                             "global"))
                elif name == "per-class":
                    decider = ThresholdDecider(fit_threshold(ck.model, members,
                                                             "per_class"))
                else:
                    decider = nn_decider
                evals[name] = evaluate_attack(decider, ck.model, members,
                                              nonmembers)
            records.append(EpochRecord(ck.epoch_index,
                                       test_accuracy(ck.model, nonmembers),
                                       epsilons[ck.epoch_index - 1], evals))
        runs.append(records)
    return runs


def _attack_config(run_config, attack_epochs, split):
    n = len(split.shadow_train) + len(split.shadow_test)
    return TrainConfig(variant="sgd",
                       schedule=constant_schedule(0.1, attack_epochs),
                       batch_size=min(32, n), epochs=attack_epochs,
                       seed=run_config.seed)


def _ci_half_width(values):
    if len(values) == 1:
        return 0.0
    return 1.96 * float(np.std(values, ddof=1)) / math.sqrt(len(values))


def aggregate(runs, attack="threshold"):
    """Per-epoch cross-run means with 95% CI half-widths (1.96 * s / sqrt(R))."""
    if not runs:
        raise ValueError("no runs to aggregate")
    epochs = len(runs[0])
    if any(len(run) != epochs for run in runs):
        raise ValueError("all runs must share the epoch count")
    points = []
    for e in range(epochs):
        accs = np.array([run[e].test_accuracy for run in runs])
        perrs = np.array([run[e].attacks[attack].p_err for run in runs])
        points.append(FrontierPoint(
            epoch=runs[0][e].epoch,
            mean_accuracy=float(accs.mean()), ci_accuracy=_ci_half_width(accs),
            mean_p_err=float(perrs.mean()), ci_p_err=_ci_half_width(perrs),
            run_count=len(runs)))
    return points


def find_outliers(runs, epoch, attack="threshold"):
    """Samples whose decision matched their true membership in all R runs."""
    if not runs:
        raise ValueError("no runs")
    records = []
    for run in runs:
        matching = [rec for rec in run if rec.epoch == epoch]
        if not matching:
            raise ValueError(f"epoch {epoch} missing from a run")
        records.append(matching[0])
    evals = [rec.attacks[attack] for rec in records]
    member_ids = sorted(evals[0].member_decisions)
    nonmember_ids = sorted(evals[0].nonmember_decisions)
    member_out = tuple(i for i in member_ids
                       if all(ev.member_decisions[i] == 1 for ev in evals))
    nonmember_out = tuple(i for i in nonmember_ids
                          if all(ev.nonmember_decisions[i] == 0 for ev in evals))
    mf = len(member_out) / len(member_ids)
    nf = len(nonmember_out) / len(nonmember_ids)
    return OutlierReport(mf, nf, (mf + nf) / 2.0, member_out, nonmember_out)


def dominates(candidate, reference, tolerance=0.0):
    """True iff every reference point is covered by some candidate point that
    gives no less privacy (mean_p_err) and no less utility (mean_accuracy),
    each up to the tolerance."""
    if not candidate or not reference:
        raise ValueError("frontiers must be non-empty")
    return all(any(c.mean_p_err >= r.mean_p_err - tolerance
                   and c.mean_accuracy >= r.mean_accuracy - tolerance
                   for c in candidate)
               for r in reference)
