"""Command-line surface: ``run``, ``report`` and ``summarize-dataset``"""
import argparse
from pathlib import Path
from typing import List, Optional

from app.core.assets import ReportChartManager
from app.core.config import build_plan, load_config
from app.core.errors import BenchmarkError
from app.core.log import get_logger, setup_logging
from app.models.settings import DATASET_NAMES, DEFAULT_WINDOW_LENGTH, TECHNIQUE_IDS
from app.services.experiment import load_results, plan_exit_code, report, run_plan
from app.services.ingestion import READERS, summarize_recordings, summarize_windows, window_recordings

logger = get_logger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="imu-bench",
        description="Benchmark data-driven techniques for inertial activity and placement recognition.",
    )
    parser.add_argument("--log-level", default=None, help="Logging level (overridden by IMU_BENCH_LOG_LEVEL).")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Train and evaluate the configured plan.")
    run.add_argument("--config", type=Path, required=True, help="Path to the YAML experiment config.")
    run.add_argument("--dataset", choices=DATASET_NAMES, help="Only run this dataset section.")
    run.add_argument("--technique", choices=TECHNIQUE_IDS, help="Only run this technique (baseline always runs).")
    run.add_argument("--seed", type=int, help="Only run this seed.")

    rep = commands.add_parser("report", help="Build improvement tables and charts from a results file.")
    rep.add_argument("--results", type=Path, required=True, help="Path to results.jsonl.")
    rep.add_argument("--out", type=Path, required=True, help="Directory for tables and charts.")
    rep.add_argument("--no-charts", action="store_true", help="Write the tables only.")

    summary = commands.add_parser("summarize-dataset", help="Per-class minutes of a dataset.")
    summary.add_argument("--name", choices=DATASET_NAMES, required=True)
    summary.add_argument("--root", type=Path, required=True, help="Dataset root directory.")
    summary.add_argument("--window-length", type=int, help="Window length in samples (default per dataset).")
    summary.add_argument("--raw", action="store_true", help="Count recorded samples instead of full windows.")
    summary.add_argument("--out", type=Path, help="Write a class-time chart to this PNG file.")
    return parser


def _run(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    if args.log_level is None:
        setup_logging(config.log_level)
    plan = build_plan(config, dataset=args.dataset, technique=args.technique, seed=args.seed)
    results = run_plan(plan)
    for result in results:
        accuracy = "-" if result.accuracy is None else f"{result.accuracy:6.2f}"
        delta = "-" if result.delta is None else f"{result.delta:+6.2f}"
        print(f"{result.dataset:12s} {result.technique:9s} s{result.seed:<3d} {result.status:14s} {accuracy} {delta}")
    return plan_exit_code(results)


def _report(args: argparse.Namespace) -> int:
    tables = report(load_results(args.results), args.out, charts=not args.no_charts)
    print(tables.summary.to_string(index=False))
    return 0


def _summarize(args: argparse.Namespace) -> int:
    recordings = READERS[args.name](args.root)
    if args.raw:
        table = summarize_recordings(recordings)
    else:
        win_len = args.window_length or DEFAULT_WINDOW_LENGTH[args.name]
        draft = window_recordings(recordings, win_len)
        table = summarize_windows(draft.windows, draft.rate_hz, draft.classes)
    print(table.to_string(index=False, float_format=lambda v: f"{v:.2f}"))
    print(f"total: {table['minutes'].sum():.2f} min over {len(recordings.subjects)} subjects")
    if args.out is not None:
        ReportChartManager.class_time_chart(table, args.name, args.out)
    return 0


COMMANDS = {"run": _run, "report": _report, "summarize-dataset": _summarize}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        return COMMANDS[args.command](args)
    except BenchmarkError as exc:
        logger.error("%s", exc)
        return exc.exit_code
