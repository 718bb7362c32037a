"""Command line entry points: run, tune-wait, gen, corrupt."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .data import Dataset, gen_ring_vs_blob, gen_two_gaussians, load_dataset, save_dataset
from .noise import NoiseSpec, corrupt
from .runner import emit, parse_config, run_experiment, tune_wait


def _fmt(value) -> str:
    return "-" if value is None else f"{value:.4f}"


def _cmd_run(args) -> int:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out_dir"] = args.out
    cfg = parse_config(args.config, overrides)
    result = run_experiment(cfg)
    if cfg.out_dir:
        emit(result, cfg.out_dir)
    last = result.final
    print(
        f"method={cfg.scheduler.method.value} epochs={cfg.epochs} seed={cfg.seed} "
        f"train_acc={_fmt(last.train_acc)} test_acc={_fmt(last.test_acc)} "
        f"mem_ratio={_fmt(last.mem_ratio)} retained={len(result.retained)}/{result.ledger.n}"
    )
    if cfg.out_dir:
        print(f"wrote epochs.csv, ledger.csv, retained.csv, config.echo to {cfg.out_dir}")
    return 0


def _cmd_tune_wait(args) -> int:
    cfg = parse_config(args.config, {"seed": args.seed} if args.seed is not None else None)
    grid = [int(w) for w in args.grid.split(",") if w.strip()]
    best, table = tune_wait(cfg, grid, k_folds=args.folds)
    print("wait  mean_heldout_acc  per_fold")
    for row in table:
        folds = " ".join(_fmt(a) for a in row.fold_accuracies)
        note = "; ".join(e for e in row.errors if e)
        print(f"{row.wait:<5d} {_fmt(row.mean_accuracy):<17s} {folds}{('  ' + note) if note else ''}")
    print(f"best wait: {best}")
    return 0


def _cmd_gen(args) -> int:
    if args.kind == "gaussians":
        ds = gen_two_gaussians(args.n, args.d, args.separation, args.seed)
    else:
        ds = gen_ring_vs_blob(args.n, args.jitter, args.seed)
    save_dataset(ds, args.out)
    print(f"wrote {ds.n} instances (d={ds.d}, k={ds.num_classes}) to {args.out}")
    return 0


def _cmd_corrupt(args) -> int:
    ds = load_dataset(args.infile)
    spec = NoiseSpec.parse(args.noise)
    observed, mask = corrupt(ds.observed, spec, args.seed, ds.num_classes)
    # the input's labels become the ground truth unless it already carries one
    truth = ds.truth if ds.truth is not None else ds.observed.copy()
    save_dataset(
        Dataset(ds.features, observed, truth, ds.truth_known, ds.num_classes), args.out
    )
    print(f"flipped {int(mask.sum())}/{ds.n} labels; wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="marvel",
        description="Margin-history instance filtering for training under label noise.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment from a config file")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_run.add_argument("--out", default=None, help="override the output directory")
    p_run.set_defaults(func=_cmd_run)

    p_tune = sub.add_parser("tune-wait", help="cross-validate the wait period")
    p_tune.add_argument("--config", required=True)
    p_tune.add_argument("--grid", required=True, help="comma list, e.g. 3,4,5,6,7")
    p_tune.add_argument("--folds", type=int, default=5)
    p_tune.add_argument("--seed", type=int, default=None)
    p_tune.set_defaults(func=_cmd_tune_wait)

    p_gen = sub.add_parser("gen", help="write a synthetic dataset file")
    p_gen.add_argument("--kind", choices=("gaussians", "ring"), required=True)
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--n", type=int, required=True)
    p_gen.add_argument("--d", type=int, default=2, help="gaussians: feature dimension")
    p_gen.add_argument("--separation", type=float, default=1.0, help="gaussians: mean separation")
    p_gen.add_argument("--jitter", type=float, default=0.0, help="ring: radial noise scale")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.set_defaults(func=_cmd_gen)

    p_cor = sub.add_parser("corrupt", help="inject label noise into a dataset file")
    p_cor.add_argument("--in", dest="infile", required=True)
    p_cor.add_argument(
        "--noise", required=True,
        help="asym:RHO_NEG,RHO_POS | sym:RHO | circ:RHO | pairs:RHO:9>1,2>0",
    )
    p_cor.add_argument("--seed", type=int, default=0)
    p_cor.add_argument("--out", required=True)
    p_cor.set_defaults(func=_cmd_corrupt)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
