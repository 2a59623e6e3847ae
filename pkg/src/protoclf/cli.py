"""Command-line pipeline: gen, select, adjust, train, eval, experiment.

Every subcommand is deterministic given its flags (all randomness flows from
--seed) and writes its resolved configuration next to its outputs. Exit
codes: 0 success, 2 configuration or input-validation error, 1 runtime
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from protoclf.benchmark import (
    SynthSpec,
    default_grid,
    evaluate,
    generate,
    run_experiment,
)
from protoclf.data import Dataset, DatasetFormatError, load_dataset, save_dataset, subsample
from protoclf.prototypes import PrototypeSet, select_prototypes
from protoclf.training import (
    ClassifierHead,
    ConfigError,
    TrainConfig,
    adjust_labels,
    preliminary_train,
    save_loss_trace,
    train,
)

VALIDATION_ERRORS = (ConfigError, DatasetFormatError, FileNotFoundError, ValueError)


def _write_resolved_config(args: argparse.Namespace, out_dir: Path, name: str) -> None:
    resolved = {k: v for k, v in sorted(vars(args).items()) if not k.startswith("_") and k != "func"}
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / name).write_text(json.dumps(resolved, sort_keys=True, indent=1) + "\n")


def _spec_from_args(args: argparse.Namespace) -> SynthSpec:
    return SynthSpec(
        n_per_class=args.n,
        dim=args.dim,
        classes=args.classes,
        cluster_sigma=args.cluster_sigma,
        centroid_distance=args.centroid_distance,
        anomaly_frac=args.anomaly_frac,
        noise_rate=args.noise,
        seed=args.seed,
        anomaly_mix=args.anomaly_mix,
        anomaly_dispersion=args.anomaly_dispersion,
        anomaly_radius_scale=args.anomaly_radius_scale,
    )


def _cfg_from_args(args: argparse.Namespace) -> TrainConfig:
    return TrainConfig(
        alpha=getattr(args, "alpha", 0.0),
        beta=getattr(args, "beta", 0.0),
        lr=args.lr,
        weight_decay=args.weight_decay,
        batch_size=args.batch_size,
        epochs=getattr(args, "epochs", 20),
        seed=args.seed,
        s_c_percentile=getattr(args, "s_c_percentile", 20.0),
        preliminary_epochs=getattr(args, "preliminary_epochs", 2),
        adjust_labels=bool(getattr(args, "adjust", False)),
    )


def cmd_gen(args: argparse.Namespace) -> int:
    spec = _spec_from_args(args)
    ds = generate(spec)
    out = Path(args.out)
    save_dataset(ds, out)
    _write_resolved_config(args, out, "resolved_config.json")
    print(f"wrote dataset: n={ds.n} dim={ds.dim} classes={ds.classes} -> {out}")
    return 0


def _dataset_with_logits(ds: Dataset, args: argparse.Namespace) -> Dataset:
    if ds.logits is not None:
        return ds
    if args.preliminary_epochs is None:
        raise ConfigError(
            "dataset has no logits; pass --preliminary-epochs to fit them"
        )
    cfg = TrainConfig(
        alpha=0.0, beta=0.0, lr=args.lr, weight_decay=args.weight_decay,
        batch_size=args.batch_size, epochs=0, seed=args.seed,
        preliminary_epochs=args.preliminary_epochs,
    )
    return ds.with_logits(preliminary_train(ds, cfg))


def cmd_select(args: argparse.Namespace) -> int:
    ds = load_dataset(args.data)
    ds = _dataset_with_logits(ds, args)
    members = None
    if args.subsample_q is not None:
        members = subsample(ds, args.subsample_q, args.seed)
    protos = select_prototypes(
        ds,
        s_c_percentile=args.s_c_percentile,
        budget_override=args.protos_per_class,
        members_per_class=members,
        confidence_scaling=args.confidence_scaling,
    )
    out = Path(args.out if args.out else args.data)
    out.mkdir(parents=True, exist_ok=True)
    protos.save(out / "prototypes.json")

    # sidecar: the selection coordinates per covered sample
    from protoclf.metrics import compute_class_metrics

    sidecar = {}
    for c in range(ds.classes):
        mem = None if members is None else members[c]
        cm = compute_class_metrics(ds, c, args.s_c_percentile, mem, args.confidence_scaling)
        sidecar[str(c)] = {
            "indices": [int(i) for i in cm.indices],
            "s_c": float(cm.s_c),
            "proximity": [int(v) for v in cm.proximity],
            "confidence": [float(v) for v in cm.confidence],
        }
    (out / "selection_metrics.json").write_text(json.dumps(sidecar, sort_keys=True) + "\n")
    _write_resolved_config(args, out, "resolved_config_select.json")
    sizes = {c: (len(protos.difficult[c]), len(protos.anomaly[c])) for c in protos.classes()}
    print(f"wrote prototypes for {len(sizes)} classes (difficult, anomaly per class: {sizes})")
    return 0


def cmd_adjust(args: argparse.Namespace) -> int:
    ds = load_dataset(args.data)
    protos = PrototypeSet.load(args.prototypes)
    adj = adjust_labels(ds, protos, margin=args.adjust_margin)
    out = Path(args.out) if args.out else Path(args.data) / "labels_adjusted.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    adj.save(out, ds)
    _write_resolved_config(args, out.parent, "resolved_config_adjust.json")
    changed = int(adj.changed.sum())
    msg = f"adjusted labels: {changed}/{ds.n} changed"
    if ds.clean_labels is not None:
        acc = float((adj.adjusted == ds.clean_labels).mean())
        msg += f", adj_label_acc={acc:.4f}"
    print(msg)
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    ds = load_dataset(args.data)
    protos = PrototypeSet.load(args.prototypes)
    cfg = _cfg_from_args(args)
    adjusted = None
    if cfg.adjust_labels:
        adjusted = adjust_labels(ds, protos, margin=args.adjust_margin)
    head, trace = train(
        ds, protos, cfg, anomaly_label_pool=args.anomaly_label_pool, adjusted=adjusted
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    head.save(out / "head.json")
    save_loss_trace(trace, out / "loss_trace.csv")
    if adjusted is not None:
        adjusted.save(out / "labels_adjusted.json", ds)
    _write_resolved_config(args, out, "resolved_config_train.json")
    final = trace[-1]["total"] if trace else float("nan")
    print(f"trained head for {cfg.epochs} epochs (final loss {final:.6f}) -> {out}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    ds = load_dataset(args.data)
    head = ClassifierHead.load(args.head)
    if head.dim != ds.dim or head.classes != ds.classes:
        raise ConfigError(
            f"head shape ({head.dim}, {head.classes}) does not match dataset "
            f"({ds.dim}, {ds.classes})"
        )
    if args.labels == "clean" or (args.labels == "auto" and ds.clean_labels is not None):
        if ds.clean_labels is None:
            raise ConfigError("dataset has no clean labels")
        truth = ds.clean_labels
    else:
        truth = ds.noisy_labels
    preds = head.logits(ds.embeddings.astype(np.float64)).argmax(axis=1)
    rep = evaluate(preds, truth, classes=ds.classes)
    out = Path(args.out) if args.out else Path(args.data) / "metrics.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(rep.to_json() + "\n")
    print(
        f"accuracy={rep.accuracy:.4f} macro_f1={rep.macro_f1:.4f} "
        f"macro_recall={rep.macro_recall:.4f}"
    )
    return 0


def cmd_experiment(args: argparse.Namespace) -> int:
    spec = _spec_from_args(args)
    cfg = TrainConfig(
        lr=args.lr, weight_decay=args.weight_decay, batch_size=args.batch_size,
        epochs=args.epochs, seed=args.seed, s_c_percentile=args.s_c_percentile,
        preliminary_epochs=args.preliminary_epochs,
    )
    if args.grid == "default":
        grid = default_grid()
    elif args.grid == "flagship":
        grid = [(0.0, 0.0, False), (0.2, 0.3, True)]
    else:
        raise ConfigError(f"unknown grid {args.grid!r}")
    seeds = [int(s) for s in args.seeds.split(",") if s.strip() != ""]
    if not seeds:
        raise ConfigError("no seeds given")
    result = run_experiment(
        spec, grid, cfg, seeds,
        protos_per_class=args.protos_per_class,
        anomaly_label_pool=args.anomaly_label_pool,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result.save(out / "report.csv")
    surface = result.sweep_surface()
    if surface:
        (out / "sweep_surface.csv").write_text(surface)
    _write_resolved_config(args, out, "resolved_config_experiment.json")
    base = result.mean_accuracy(0.0, 0.0, False)
    flag = result.mean_accuracy(0.2, 0.3, True) if any(g == (0.2, 0.3, True) for g in grid) else None
    msg = f"report with {len(result.rows)} rows -> {out / 'report.csv'}; test acc (0,0,off)={base:.4f}"
    if flag is not None:
        msg += f", (0.2,0.3,on)={flag:.4f}"
    print(msg)
    return 0


def _add_spec_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--n", type=int, default=200, help="samples per class")
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--noise", type=float, default=0.3, help="symmetric label-flip rate")
    p.add_argument("--cluster-sigma", type=float, default=1.0)
    p.add_argument("--centroid-distance", type=float, default=6.0)
    p.add_argument("--anomaly-frac", type=float, default=0.1)
    p.add_argument("--anomaly-mix", type=float, default=0.8)
    p.add_argument("--anomaly-dispersion", type=float, default=1.2)
    p.add_argument("--anomaly-radius-scale", type=float, default=4.5)


def _add_train_flags(p: argparse.ArgumentParser, with_objective: bool) -> None:
    if with_objective:
        p.add_argument("--alpha", type=float, default=0.2)
        p.add_argument("--beta", type=float, default=0.3)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--weight-decay", type=float, default=5e-5)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--preliminary-epochs", type=int, default=2)
    p.add_argument("--s-c-percentile", type=float, default=20.0)


def build_parser() -> tuple[argparse.ArgumentParser, list[argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="protoclf",
        description="Prototype selection, self-learning and label adjustment on embeddings",
    )
    parser.add_argument("--seed", type=int, default=0, help="root seed for all randomness")
    parser.add_argument(
        "--threads", type=int, default=1,
        help="worker hint; outputs are identical for any value",
    )
    parser.add_argument("--config", type=str, default=None, help="JSON file with flag defaults")
    # the global flags are also accepted after the subcommand; SUPPRESS keeps
    # the subparser from clobbering values parsed at the top level
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    shared.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    shared.add_argument("--config", type=str, default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)
    subcommands: list[argparse.ArgumentParser] = []

    p = sub.add_parser("gen", help="generate a planted synthetic dataset directory", parents=[shared])
    subcommands.append(p)
    p.add_argument("--out", required=True)
    _add_spec_flags(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("select", help="select difficult and anomaly prototypes", parents=[shared])
    subcommands.append(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", default=None, help="output dir (default: the dataset dir)")
    p.add_argument("--s-c-percentile", type=float, default=20.0)
    p.add_argument("--subsample-q", type=int, default=None)
    p.add_argument("--protos-per-class", type=int, default=None)
    p.add_argument("--preliminary-epochs", type=int, default=None,
                   help="fit logits first when the dataset has none")
    p.add_argument("--confidence-scaling", choices=("softmax", "minmax"), default="softmax")
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--weight-decay", type=float, default=5e-5)
    p.add_argument("--batch-size", type=int, default=32)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("adjust", help="adjust noisy labels via difficult-prototype similarity", parents=[shared])
    subcommands.append(p)
    p.add_argument("--data", required=True)
    p.add_argument("--prototypes", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--adjust-margin", type=float, default=0.0)
    p.set_defaults(func=cmd_adjust)

    p = sub.add_parser("train", help="train the softmax head with the multi-objective loss", parents=[shared])
    subcommands.append(p)
    p.add_argument("--data", required=True)
    p.add_argument("--prototypes", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--adjust", action="store_true", help="train on adjusted labels")
    p.add_argument("--adjust-margin", type=float, default=0.0)
    p.add_argument("--anomaly-label-pool", choices=("union", "anomaly"), default="union")
    _add_train_flags(p, with_objective=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained head on a dataset", parents=[shared])
    subcommands.append(p)
    p.add_argument("--data", required=True)
    p.add_argument("--head", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--labels", choices=("auto", "clean", "noisy"), default="auto")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("experiment", help="run the (alpha, beta, adjust) grid end to end", parents=[shared])
    subcommands.append(p)
    p.add_argument("--out", required=True)
    p.add_argument("--grid", choices=("default", "flagship"), default="default")
    p.add_argument("--seeds", type=str, default="0,1,2,3,4")
    p.add_argument("--protos-per-class", type=int, default=None)
    p.add_argument("--anomaly-label-pool", choices=("union", "anomaly"), default="union")
    _add_spec_flags(p)
    _add_train_flags(p, with_objective=False)
    p.set_defaults(func=cmd_experiment)
    return parser, subcommands


def main(argv: list[str] | None = None) -> int:
    parser, subcommands = build_parser()
    args, _ = parser.parse_known_args(argv)
    if args.config:
        try:
            overrides = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as e:
            print(f"error: cannot read config file: {e}", file=sys.stderr)
            return 2
        parser.set_defaults(**overrides)
        for sp in subcommands:
            sp.set_defaults(**{k: v for k, v in overrides.items()
                               if any(a.dest == k for a in sp._actions)})
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except VALIDATION_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # runtime failure
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
