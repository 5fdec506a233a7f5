"""Command-line entry point: ``fairbandit run`` and ``fairbandit plot``."""

from __future__ import annotations

import argparse
import sys

from .experiments import ConfigError, ResultTable, load_config, run
from .plot import PlotError, render_plot


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairbandit", description="Fair contextual bandit experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment and write trials.csv / aggregate.csv")
    p_run.add_argument("--config", help="key=value config file")
    p_run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key (repeatable)")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--workers", type=int, default=None,
                       help="worker processes (default: FAIRBANDIT_THREADS or CPU count)")

    p_plot = sub.add_parser("plot", help="render one metric from a result CSV as SVG")
    p_plot.add_argument("--in", dest="inp", required=True, help="trials.csv or aggregate.csv")
    p_plot.add_argument("--metric", required=True)
    p_plot.add_argument("--out", required=True, help="SVG path")
    p_plot.add_argument("--title")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = load_config(args.config, args.set)
            _, agg, _ = run(cfg, args.out, args.workers)
            print(f"{cfg.experiment}: {cfg.N} trials, {len(agg)} aggregate rows -> {args.out}")
        else:
            table = ResultTable.read_csv(args.inp)
            render_plot(table.rows, args.metric, args.out, args.title)
    except (ConfigError, PlotError, OSError, ValueError) as exc:
        print(f"fairbandit: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
