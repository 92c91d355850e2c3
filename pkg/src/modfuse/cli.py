"""Command-line entry point: run studies, summarize results, draw box plots.

Exit codes: 0 success, 2 configuration/usage error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .report import (
    emit_boxplot,
    read_results_csv,
    summary_from_rows,
    summary_to_dict,
    write_results_csv,
    write_summary_json,
    write_trace_csv,
)
from .robot import MethodVariant
from .scenario import ScenarioConfig, config_from_dict, run_study, simulate_trial

__all__ = ["main", "entrypoint"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3


class ConfigError(ValueError):
    """Invalid configuration file, flag value or method name."""


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modfuse",
        description="Modular-fusion bearing localization benchmark runner",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a Monte Carlo study and write results")
    run_p.add_argument("--config", help="JSON config file (defaults used when omitted)")
    run_p.add_argument("--trials", type=int, help="number of trials")
    run_p.add_argument("--seed", type=int, help="study seed")
    run_p.add_argument("--methods", help="comma-separated method names")
    run_p.add_argument("--out", required=True, help="output directory")
    run_p.add_argument("--threads", type=int, help="worker processes (env MODFUSE_THREADS)")
    run_p.add_argument("--trace-trial", type=int, dest="trace_trial", metavar="I",
                       help="also write trajectories_I.csv for trial I")

    sum_p = sub.add_parser("summarize", help="recompute summary statistics from a results CSV")
    sum_p.add_argument("--in", dest="in_path", required=True, help="results.csv path")
    sum_p.add_argument("--out", required=True, help="summary JSON path")

    box_p = sub.add_parser("boxplot", help="emit a box-plot SVG from a results CSV")
    box_p.add_argument("--in", dest="in_path", required=True, help="results.csv path")
    box_p.add_argument("--out", required=True, help="SVG path")
    return parser


def _load_config(args: argparse.Namespace) -> ScenarioConfig:
    raw: dict = {}
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"unparseable config {args.config}: line {exc.lineno}: {exc.msg}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"config {args.config} must be a JSON object")
    if args.trials is not None:
        raw["n_trials"] = args.trials
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.methods is not None:
        raw["methods"] = [name for name in args.methods.split(",") if name]
    try:
        return config_from_dict(raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def _thread_count(args: argparse.Namespace) -> int:
    if args.threads is not None:
        count = args.threads
    else:
        env = os.environ.get("MODFUSE_THREADS")
        try:
            count = int(env) if env else 1
        except ValueError as exc:
            raise ConfigError(f"MODFUSE_THREADS must be an integer, got {env!r}") from exc
    if count < 1:
        raise ConfigError("thread count must be >= 1")
    return count


def _cmd_run(args: argparse.Namespace) -> int:
    config = _load_config(args)
    workers = _thread_count(args)
    if args.trace_trial is not None and not 0 <= args.trace_trial < config.n_trials:
        raise ConfigError(f"--trace-trial must be in [0, {config.n_trials})")
    records, summary = run_study(config, n_workers=workers)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_results_csv(records, config, out_dir / "results.csv")
    write_summary_json(summary_to_dict(summary), out_dir / "summary.json")
    if args.trace_trial is not None:
        traced = simulate_trial(config, args.trace_trial, trace=True)
        write_trace_csv(traced, config, out_dir / f"trajectories_{args.trace_trial}.csv")
    return EXIT_OK


def _cmd_summarize(args: argparse.Namespace) -> int:
    rows = read_results_csv(args.in_path)
    write_summary_json(summary_from_rows(rows), args.out)
    return EXIT_OK


def _cmd_boxplot(args: argparse.Namespace) -> int:
    rows = read_results_csv(args.in_path)
    values: dict[str, list[float]] = {}
    for row in rows:
        if not row["failed"]:
            values.setdefault(row["method"], []).append(row["e_l_T"])
    emit_boxplot({k: np.asarray(v) for k, v in values.items()}, args.out)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 on --help.
        return int(exc.code or 0)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "summarize":
            return _cmd_summarize(args)
        if args.command == "boxplot":
            return _cmd_boxplot(args)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


def entrypoint() -> None:
    raise SystemExit(main())
