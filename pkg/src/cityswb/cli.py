"""Command-line entry point: ``cityswb <stage> --config run.json``.

Exit codes: 0 success, 1 input error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ._validation import InputError, NumericalError
from . import pipeline
from .model import FEATURE_SETS, TASKS

logger = logging.getLogger("cityswb")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration (JSON)")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--jobs", type=int, help="worker processes for per-community work")
    common.add_argument("--out", help="override the output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="cityswb", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ingest", parents=[common], help="validate and partition the archive")
    sub.add_parser("wellbeing", parents=[common], help="daily WellBeing series per community")
    sub.add_parser("forecast", parents=[common], help="fit baselines and forecast the event period")
    sub.add_parser("label", parents=[common], help="assign recovery patterns and draw plots")
    sub.add_parser("features", parents=[common], help="assemble the feature matrix")
    train = sub.add_parser("train", parents=[common], help="leave-one-out evaluation")
    train.add_argument("--task", choices=TASKS, default="impact")
    train.add_argument("--feature-set", choices=list(FEATURE_SETS), default="all")
    sub.add_parser("correlate", parents=[common], help="rank correlation with BRIC scores")
    sub.add_parser("report", parents=[common], help="all feature sets, both tasks, summary")
    sub.add_parser("all", parents=[common], help="run every stage in order")
    synth = sub.add_parser("synth", help="write a synthetic input set")
    synth.add_argument("directory")
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--patterns", default="Unaffected,Recovered,NonRecovered",
                       help="comma-separated recovery pattern per community")
    synth.add_argument("--records-per-day", type=float, default=8.0)
    synth.add_argument("-v", "--verbose", action="store_true")
    return parser


def _config(args) -> pipeline.RunConfig:
    if args.config:
        cfg = pipeline.RunConfig.load(args.config)
    else:
        cfg = pipeline.RunConfig()
    if args.seed is not None:
        cfg.data["seed"] = args.seed
    if args.jobs is not None:
        cfg.data["jobs"] = args.jobs
    if args.out is not None:
        # a command-line path is relative to the working directory
        cfg.data["out"] = str(Path(args.out).resolve())
    return cfg


def run(args) -> None:
    if args.command == "synth":
        from .synthetic import generate
        patterns = [p.strip() for p in args.patterns.split(",") if p.strip()]
        generate(args.directory, patterns=patterns, seed=args.seed,
                 records_per_day=args.records_per_day)
        print(f"wrote synthetic inputs and config.json to {args.directory}")
        return
    cfg = _config(args)
    cmd = args.command
    if cmd == "ingest":
        summary = pipeline.run_ingest(cfg)
        print(f"{summary['records']} records, {summary['skipped']} malformed, "
              f"{summary['retained']}/{summary['communities']} communities retained")
    elif cmd == "wellbeing":
        names = pipeline.run_wellbeing(cfg)
        print(f"wellbeing series for {len(names)} communities")
    elif cmd == "forecast":
        names = pipeline.run_forecast(cfg)
        print(f"forecasts for {len(names)} communities")
    elif cmd == "label":
        labels = pipeline.run_label(cfg)
        print(labels.to_string(index=False))
    elif cmd == "features":
        fm = pipeline.run_features(cfg)
        print(f"feature matrix: {fm.X.shape[0]} communities x {fm.X.shape[1]} features")
    elif cmd == "train":
        report = pipeline.run_train(cfg, args.task, args.feature_set)
        print(report.metrics_frame(args.feature_set).to_string(float_format=lambda v: f"{v:.3f}"))
    elif cmd == "correlate":
        print(pipeline.run_correlate(cfg).to_string(index=False))
    elif cmd == "report":
        pipeline.run_report(cfg)
        print((cfg.out / "report" / "report.md").read_text())
    elif cmd == "all":
        pipeline.run_all(cfg)
        print(f"done; outputs in {cfg.out}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        run(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
