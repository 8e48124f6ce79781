"""Command-line driver: train seeded runs, fuse them, emit CSV.

Exit codes: 0 on success, 1 when a run fails (divergence, unwritable
output), 2 on usage errors (unknown flags, out-of-range values).
"""

from __future__ import annotations

import argparse
import json
import sys

from .bench import TASKS, DivergenceError, ExperimentConfig, emit_csv, format_report, run_ensemble

_CLI_DEFAULTS = {
    "task": "blobs",
    "optimizer": "adam",
    "runs": 1,
    "epochs": 20,
    "batch_size": 30,
    "lr": 0.001,
    "rho1": 0.9,
    "rho2": 0.999,
    "epsilon": 1e-8,
    "k": 4.0,
    "steps": 30,
    "norm_scope": "per-tensor",
    "avg_mode": "squared-grad",
    "seed": 0,
    "out": None,
    "timing": False,
}


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="optbench",
        description="Train seeded runs of (task x optimizer), fuse them, and emit CSV results.",
    )
    p.add_argument("--task", choices=TASKS, help="training task")
    p.add_argument("--optimizer", help="optimizer variant, or comma-separated list for ensembles")
    p.add_argument("--runs", type=int, help="runs per optimizer variant")
    p.add_argument("--epochs", type=int, help="training epochs per run")
    p.add_argument("--batch-size", type=int, dest="batch_size", help="mini-batch size")
    p.add_argument("--lr", type=float, help="base learning rate")
    p.add_argument("--rho1", type=float, help="first-moment decay factor")
    p.add_argument("--rho2", type=float, help="second-moment decay factor")
    p.add_argument("--epsilon", type=float, help="division guard added to sqrt of second moment")
    p.add_argument("--k", type=float, help="scaling factor for the exp variant")
    p.add_argument("--steps", type=int, help="cyclic rate period for the cos variant")
    p.add_argument("--norm-scope", choices=["per-tensor", "global"], dest="norm_scope",
                   help="span of max() when normalizing gradient deltas")
    p.add_argument("--avg-mode", choices=["squared-grad", "grad"], dest="avg_mode",
                   help="what the running average tracks")
    p.add_argument("--seed", type=int, help="base seed; run i uses seed+i")
    p.add_argument("--out", help="path for the CSV of per-epoch records")
    p.add_argument("--config", help="JSON file of defaults for any flag (flags override)")
    p.add_argument("--timing", action="store_true", default=None,
                   help="record wall-clock ms per epoch (breaks byte-identical output)")
    return p


def parse_cli(argv: list[str] | None = None) -> ExperimentConfig:
    """Turn flags (plus an optional JSON config file) into an ExperimentConfig.

    Precedence: flag > config-file entry > built-in default. Invalid values
    surface as usage errors (exit 2).
    """
    parser = _build_parser()
    args = parser.parse_args(argv)

    file_values: dict = {}
    if args.config is not None:
        try:
            with open(args.config) as fh:
                file_values = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            parser.error(f"cannot read config file {args.config}: {exc}")
        if not isinstance(file_values, dict):
            parser.error(f"config file {args.config} must hold a JSON object")
        unknown = set(file_values) - set(_CLI_DEFAULTS)
        if unknown:
            parser.error(f"unknown config file keys: {sorted(unknown)}")

    def pick(name: str):
        flag = getattr(args, name)
        if flag is not None:
            return flag
        if name in file_values:
            return file_values[name]
        return _CLI_DEFAULTS[name]

    try:
        cfg = ExperimentConfig(
            task=pick("task"),
            optimizers=tuple(v.strip() for v in str(pick("optimizer")).split(",") if v.strip()),
            runs=int(pick("runs")),
            epochs=int(pick("epochs")),
            batch_size=int(pick("batch_size")),
            seed=int(pick("seed")),
            lr=float(pick("lr")),
            rho1=float(pick("rho1")),
            rho2=float(pick("rho2")),
            epsilon=float(pick("epsilon")),
            k=float(pick("k")),
            steps=int(pick("steps")),
            norm_scope=str(pick("norm_scope")).replace("-", "_"),
            avg_mode=str(pick("avg_mode")).replace("-", "_"),
            out=pick("out"),
            timing=bool(pick("timing")),
        )
    except ValueError as exc:
        parser.error(str(exc))
    return cfg


def main(argv: list[str] | None = None) -> int:
    cfg = parse_cli(argv)
    try:
        report = run_ensemble(cfg)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if cfg.out is not None and exc.records:
            try:
                emit_csv(exc.records, cfg.out)
            except OSError:
                pass
        return 1

    if cfg.out is not None:
        try:
            emit_csv(report.records, cfg.out)
        except OSError as exc:
            print(f"error: cannot write {cfg.out}: {exc}", file=sys.stderr)
            return 1
    print(format_report(report))
    return 0


if __name__ == "__main__":
    sys.exit(main())
