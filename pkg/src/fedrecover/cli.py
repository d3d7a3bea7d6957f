"""Command-line experiment runner.

Subcommands:
  run               one federated experiment -> rounds/summary/partition files
  sweep             re-run a base config across one axis, combined table + plot
  partition-report  just the (client, class, count) table for a config
  world-gen         materialize a world and serialize its pools

Exit codes: 0 success, 1 config error, 2 runtime numerical error.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from .config import (
    SWEEP_AXES,
    ConfigError,
    ExperimentConfig,
    load_config,
    validate_config,
)
from .core import NumericsError, derive_stream
from .runner import build_configured_partition, build_configured_world, run_experiment
from . import report
from .worldgen import save_world


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.out is not None:
        updates["out_dir"] = args.out
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError("run.workers: must be >= 1")
        updates["workers"] = args.workers
    if args.no_plots:
        updates["plots"] = False
    return replace(cfg, **updates) if updates else cfg


def cmd_run(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    result = run_experiment(cfg)
    written = report.write_run_outputs(cfg.out_dir, result, plots=cfg.plots)
    pers = result.personalization
    print(f"final global accuracy: {result.final_accuracy:.4f}")
    if pers is not None:
        print(f"mean personalized accuracy: {pers.mean_best:.4f}")
    print(f"wrote {len(written)} files to {cfg.out_dir}")
    return 0


def _sweep_seed(root_seed: int, index: int) -> int:
    # derived from (root, value index) so appending values never perturbs
    # the runs that came before
    return int(derive_stream(root_seed, ("sweep", index)).generator.integers(2**63 - 1))


def cmd_sweep(args) -> int:
    base = _apply_overrides(load_config(args.config), args)
    if args.axis not in SWEEP_AXES:
        raise ConfigError(
            f"unknown sweep axis {args.axis!r}; expected one of {sorted(SWEEP_AXES)}"
        )
    attr, typ = SWEEP_AXES[args.axis]
    try:
        values = [typ(tok) for tok in args.values.split(",") if tok.strip() != ""]
    except ValueError:
        raise ConfigError(f"cannot parse --values {args.values!r} as {typ.__name__} list") from None
    if not values:
        raise ConfigError("--values must list at least one value")

    rows = []
    for i, value in enumerate(values):
        sub = replace(
            base, **{attr: value},
            seed=_sweep_seed(base.seed, i),
            out_dir=os.path.join(base.out_dir, f"{args.axis}_{i}"),
        )
        validate_config(sub)
        result = run_experiment(sub)
        report.write_run_outputs(sub.out_dir, result, plots=sub.plots)
        pers = result.personalization
        rows.append((value, result.final_accuracy, pers.mean_best if pers else float("nan")))
        print(f"{args.axis}={value}: final={result.final_accuracy:.4f}")

    os.makedirs(base.out_dir, exist_ok=True)
    sweep_csv = os.path.join(base.out_dir, "sweep.csv")
    report.write_sweep_csv(sweep_csv, args.axis, rows)
    if base.plots:
        report.plot_sweep(os.path.join(base.out_dir, "sweep.png"), args.axis, rows)
    print(f"wrote {sweep_csv}")
    return 0


def cmd_partition_report(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    world = build_configured_world(cfg)
    part = build_configured_partition(cfg, world)
    os.makedirs(cfg.out_dir, exist_ok=True)
    path = os.path.join(cfg.out_dir, "partition.csv")
    report.write_partition_csv(path, part)
    if cfg.plots:
        report.plot_partition(os.path.join(cfg.out_dir, "partition.png"), part)
    print(f"wrote {path}")
    return 0


def cmd_world_gen(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    world = build_configured_world(cfg)
    save_world(cfg.out_dir, world)
    print(f"wrote world ({world.spec.class_count} classes, dim {world.spec.dim}) to {cfg.out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedrecover",
        description="deterministic federated-learning simulator with "
                    "generative label-skew recovery",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="path to the INI config file")
        p.add_argument("--seed", type=int, default=None, help="override run.seed")
        p.add_argument("--out", default=None, help="override run.out_dir")
        p.add_argument("--workers", type=int, default=None, help="override run.workers")
        p.add_argument("--no-plots", action="store_true", help="skip figure rendering")

    p_run = sub.add_parser("run", help="run one experiment")
    add_common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a base config across one axis")
    add_common(p_sweep)
    p_sweep.add_argument("--axis", required=True, help=f"one of {sorted(SWEEP_AXES)}")
    p_sweep.add_argument("--values", required=True, help="comma-separated values")
    p_sweep.set_defaults(func=cmd_sweep)

    p_part = sub.add_parser("partition-report", help="write the label histogram table")
    add_common(p_part)
    p_part.set_defaults(func=cmd_partition_report)

    p_world = sub.add_parser("world-gen", help="materialize and serialize a world")
    add_common(p_world)
    p_world.set_defaults(func=cmd_world_gen)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except NumericsError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
