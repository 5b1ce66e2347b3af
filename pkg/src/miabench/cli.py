"""Command-line front end: calculators, dataset tooling, experiments, plots."""

from __future__ import annotations

import argparse
import math
import re
import sys
from dataclasses import replace
from pathlib import Path

from .attacks import NnDecider, ThresholdDecider, evaluate_attack, fit_threshold, \
    train_shadow_attack
from .config import ConfigError, CsvSource, build_split, parse_config
from .data import FormatError, SyntheticSpec, gen_gaussian_mixture, load_csv, \
    save_csv, split_pool, stratified_four_way
from .experiment import EpochRecord, FrontierPoint, aggregate, find_outliers, \
    run_experiment
from .nn import make_dataset, test_accuracy
from .optim import load_model, save_model
from .privacy import AccountantConfig, epsilon_from_rdp, error_bound

RECORDS_HEADER = "run,epoch,accuracy,attack,fpr,fnr,p_err,epsilon"
FRONTIER_HEADER = "epoch,mean_accuracy,ci_accuracy,mean_p_err,ci_p_err"
OUTLIERS_HEADER = "epoch,population,fraction"


def _nonneg_float(raw):
    value = float(raw)
    if value < 0.0:
        raise argparse.ArgumentTypeError(f"{raw} is negative")
    return value


def _positive_int(raw):
    value = int(raw)
    if value < 1:
        raise argparse.ArgumentTypeError(f"{raw} is not a positive integer")
    return value


def _fmt(value):
    return repr(float(value))


def cmd_accountant(args):
    q = args.q if args.q is not None else args.batch / args.n
    if args.sigma == 0.0:
        print("inf")
        return 0
    steps = args.epochs * math.ceil(args.n / args.batch)
    eps = epsilon_from_rdp(AccountantConfig(
        sampling_rate=q, noise_multiplier=args.sigma, steps=steps,
        delta=args.delta))
    print(f"{eps:.6g}")
    return 0


def cmd_bound(args):
    print(f"{error_bound(args.epsilon, args.delta):.6g}")
    return 0


def cmd_synth(args):
    spec = SyntheticSpec(num_classes=args.classes, dim=args.dim,
                         per_class=args.per_class, separation=args.separation,
                         noise_std=args.noise_std, seed=args.seed)
    save_csv(args.out, gen_gaussian_mixture(spec))
    print(args.out)
    return 0


def cmd_split(args):
    if (args.test is None) == (args.train_per_class is None):
        raise ConfigError("provide exactly one of --test or --train-per-class")
    if args.test is not None:
        default_train, default_test = load_csv(args.train), load_csv(args.test)
    else:
        default_train, default_test = split_pool(load_csv(args.train),
                                                 args.train_per_class)
    split = stratified_four_way(default_train, default_test, args.seed)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for name in ("target_train", "target_test", "shadow_train", "shadow_test"):
        save_csv(outdir / f"{name}.csv", getattr(split, name))
    print(outdir)
    return 0


def _write_lines(path, lines, created):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    created.append(Path(path))


def _records_lines(runs, attacks):
    lines = [RECORDS_HEADER]
    for r, run in enumerate(runs, 1):
        for rec in run:
            for name in attacks:
                ev = rec.attacks[name]
                lines.append(",".join([
                    str(r), str(rec.epoch), _fmt(rec.test_accuracy), name,
                    _fmt(ev.fpr), _fmt(ev.fnr), _fmt(ev.p_err),
                    _fmt(rec.epsilon)]))
    return lines


def _frontier_lines(points):
    lines = [FRONTIER_HEADER]
    for p in points:
        lines.append(",".join([str(p.epoch), _fmt(p.mean_accuracy),
                               _fmt(p.ci_accuracy), _fmt(p.mean_p_err),
                               _fmt(p.ci_p_err)]))
    return lines


def _outlier_lines(runs, attack):
    lines = [OUTLIERS_HEADER]
    for rec in runs[0]:
        report = find_outliers(runs, rec.epoch, attack)
        lines.append(f"{rec.epoch},members,{_fmt(report.member_outlier_fraction)}")
        lines.append(f"{rec.epoch},nonmembers,"
                     f"{_fmt(report.nonmember_outlier_fraction)}")
        lines.append(f"{rec.epoch},average,{_fmt(report.average_fraction)}")
    return lines


def cmd_experiment(args):
    cfg = parse_config(args.config)
    # relative paths in the config resolve against the config file's directory
    base = Path(args.config).resolve().parent
    if isinstance(cfg.source, CsvSource):
        cfg = replace(cfg, source=CsvSource(str(base / cfg.source.train),
                                            str(base / cfg.source.test),
                                            cfg.source.seed))
    split = build_split(cfg)
    arch = ((split.target_train.dim,) + cfg.hidden
            + (split.target_train.num_classes,))
    outdir = Path(cfg.outdir)
    if not outdir.is_absolute():
        outdir = base / outdir
    created = []
    made_dirs = []
    try:
        for d in (outdir, outdir / "checkpoints"):
            if not d.exists():
                made_dirs.append(d)
            d.mkdir(parents=True, exist_ok=True)

        def sink(r, ck):
            path = outdir / "checkpoints" / f"run{r:02d}_epoch{ck.epoch_index:02d}.miab"
            save_model(path, ck.model)
            created.append(path)

        runs = run_experiment(split, arch, cfg.train, cfg.attacks,
                              cfg.repetitions, cfg.delta, cfg.top_k,
                              cfg.attack_train_epochs, on_checkpoint=sink)
        _write_lines(outdir / "records.csv", _records_lines(runs, cfg.attacks),
                     created)
        primary = cfg.attacks[0]
        _write_lines(outdir / "frontier.csv",
                     _frontier_lines(aggregate(runs, primary)), created)
        if len(cfg.attacks) > 1:
            for name in cfg.attacks:
                safe = name.replace("-", "_")
                _write_lines(outdir / f"frontier_{safe}.csv",
                             _frontier_lines(aggregate(runs, name)), created)
        _write_lines(outdir / "outliers.csv", _outlier_lines(runs, primary),
                     created)
    except BaseException:
        # a failed run must not leave partial outputs behind
        for path in created:
            path.unlink(missing_ok=True)
        for d in reversed(made_dirs):
            if d.exists() and not any(d.iterdir()):
                d.rmdir()
        raise
    print(outdir)
    return 0


def _rekey_nonmembers(members, nonmembers):
    """CSV loads number both sets from zero; shift non-member ids clear."""
    if set(members.ids) & set(nonmembers.ids):
        offset = int(members.ids.max()) + 1
        nonmembers = make_dataset(nonmembers.features, nonmembers.labels,
                                  nonmembers.num_classes,
                                  nonmembers.ids + offset)
    return nonmembers


def _attack_decider(args, model, members):
    if args.attack in ("threshold", "per-class"):
        mode = "global" if args.attack == "threshold" else "per_class"
        return ThresholdDecider(fit_threshold(model, members, mode))
    if args.shadow_train is None or args.shadow_test is None or args.config is None:
        raise ConfigError("the nn attack needs --shadow-train, --shadow-test "
                          "and --config")
    cfg = parse_config(args.config)
    shadow_train = load_csv(args.shadow_train)
    shadow_test = load_csv(args.shadow_test)
    am = train_shadow_attack(shadow_train, shadow_test, model.layer_dims,
                             cfg.train, cfg.top_k)
    return NnDecider(am)


def cmd_attack(args):
    model = load_model(args.checkpoint)
    classes = model.layer_dims[-1]

    def with_classes(ds):
        return make_dataset(ds.features, ds.labels, max(classes, ds.num_classes),
                            ds.ids)

    members = with_classes(load_csv(args.members))
    nonmembers = _rekey_nonmembers(members, with_classes(load_csv(args.nonmembers)))
    decider = _attack_decider(args, model, members)
    ev = evaluate_attack(decider, model, members, nonmembers)
    print(f"fpr={_fmt(ev.fpr)} fnr={_fmt(ev.fnr)} p_err={_fmt(ev.p_err)}")
    return 0


def cmd_outliers(args):
    members = load_csv(args.members)
    nonmembers = _rekey_nonmembers(members, load_csv(args.nonmembers))
    pattern = re.compile(r"run(\d+)_epoch(\d+)\.miab$")
    found = {}
    for path in sorted(Path(args.checkpoints).iterdir()):
        match = pattern.search(path.name)
        if match:
            found.setdefault(int(match.group(1)), {})[int(match.group(2))] = path
    if not found:
        raise FormatError(f"no runNN_epochMM.miab checkpoints in {args.checkpoints}")
    epochs = sorted(next(iter(found.values())))
    wanted = [args.epoch] if args.epoch is not None else epochs
    mode = "global" if args.attack == "threshold" else "per_class"
    runs = []
    for r in sorted(found):
        records = []
        for epoch in wanted:
            if epoch not in found[r]:
                raise FormatError(f"run {r} lacks a checkpoint for epoch {epoch}")
            model = load_model(found[r][epoch])
            decider = ThresholdDecider(fit_threshold(model, members, mode))
            ev = evaluate_attack(decider, model, members, nonmembers)
            records.append(EpochRecord(epoch, test_accuracy(model, nonmembers),
                                       math.inf, {args.attack: ev}))
        runs.append(records)
    lines = [OUTLIERS_HEADER]
    for epoch in wanted:
        report = find_outliers(runs, epoch, args.attack)
        lines.append(f"{epoch},members,{_fmt(report.member_outlier_fraction)}")
        lines.append(f"{epoch},nonmembers,"
                     f"{_fmt(report.nonmember_outlier_fraction)}")
        lines.append(f"{epoch},average,{_fmt(report.average_fraction)}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
        print(args.out)
    else:
        print(text, end="")
    return 0


def read_frontier_csv(path):
    """Parse a frontier CSV back into points; malformed rows name file and row."""
    points = []
    with open(path, "r", encoding="ascii") as fh:
        lines = [line.strip() for line in fh if line.strip()]
    if not lines or lines[0] != FRONTIER_HEADER:
        raise FormatError(f"{path}: row 1: expected header {FRONTIER_HEADER!r}")
    for row, line in enumerate(lines[1:], 2):
        fields = line.split(",")
        if len(fields) != 5:
            raise FormatError(f"{path}: row {row}: expected 5 fields")
        try:
            points.append(FrontierPoint(
                epoch=int(fields[0]), mean_accuracy=float(fields[1]),
                ci_accuracy=float(fields[2]), mean_p_err=float(fields[3]),
                ci_p_err=float(fields[4]), run_count=1))
        except ValueError:
            raise FormatError(f"{path}: row {row}: non-numeric field") from None
    if not points:
        raise FormatError(f"{path}: no data rows")
    return points


def cmd_frontier_plot(args):
    from .plotting import render_frontier_svg
    series = [(Path(p).stem, read_frontier_csv(p)) for p in args.frontiers]
    svg = render_frontier_svg(series)
    with open(args.out, "w", encoding="ascii", newline="\n") as fh:
        fh.write(svg)
    print(args.out)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="miabench",
        description="Train small classifiers with SGD/SAM/DP-SGD/DP-SAM, attack "
                    "them with membership-inference attacks, and report "
                    "privacy-utility frontiers.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("accountant", help="epsilon for a subsampled Gaussian run")
    p.add_argument("--sigma", type=_nonneg_float, required=True)
    p.add_argument("--n", type=_positive_int, default=25000)
    p.add_argument("--batch", type=_positive_int, default=32)
    p.add_argument("--epochs", type=_positive_int, default=15)
    p.add_argument("--delta", type=float, default=1e-5)
    p.add_argument("--q", type=float, default=None,
                   help="override the sampling rate (default batch/n)")
    p.set_defaults(func=cmd_accountant)

    p = sub.add_parser("bound", help="lower bound on any attacker's P_err")
    p.add_argument("--epsilon", type=_nonneg_float, required=True)
    p.add_argument("--delta", type=_nonneg_float, default=0.0)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("synth", help="write a Gaussian-mixture dataset as CSV")
    p.add_argument("--classes", type=_positive_int, required=True)
    p.add_argument("--dim", type=_positive_int, required=True)
    p.add_argument("--per-class", type=_positive_int, required=True)
    p.add_argument("--separation", type=_nonneg_float, required=True)
    p.add_argument("--noise-std", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("split", help="stratified four-way member/shadow split")
    p.add_argument("--train", required=True)
    p.add_argument("--test", default=None,
                   help="separate test pool (omit to slice the train pool)")
    p.add_argument("--train-per-class", type=_positive_int, default=None,
                   help="slice the train pool: this many per class stay train")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--outdir", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("experiment", help="run a config-driven experiment")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("attack", help="evaluate one attack on one checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--members", required=True)
    p.add_argument("--nonmembers", required=True)
    p.add_argument("--attack", choices=("threshold", "per-class", "nn"),
                   default="threshold")
    p.add_argument("--shadow-train", default=None)
    p.add_argument("--shadow-test", default=None)
    p.add_argument("--config", default=None,
                   help="experiment config supplying the shadow training recipe")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("outliers", help="always-correctly-decided samples across runs")
    p.add_argument("--checkpoints", required=True,
                   help="directory of runNN_epochMM.miab files")
    p.add_argument("--members", required=True)
    p.add_argument("--nonmembers", required=True)
    p.add_argument("--attack", choices=("threshold", "per-class"),
                   default="threshold")
    p.add_argument("--epoch", type=_positive_int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_outliers)

    p = sub.add_parser("frontier-plot", help="render frontier CSVs as an SVG")
    p.add_argument("frontiers", nargs="+")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_frontier_plot)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
