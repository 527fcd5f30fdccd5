"""Command-line entry point: run grids, plot summaries, list scenarios.

Exit codes: 0 success, 1 configuration error, 2 runtime/numerical contract
error, 3 I/O error. TRUNCSIM_OUT_DIR and TRUNCSIM_THREADS override the
corresponding config fields.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from pathlib import Path

from . import __version__, engine, figures, metrics, report
from .analysis import ProfileBracketError
from .config import FIGURE_METRICS, ConfigError, parse_config, resolve_plan
from .scenario import apply_sensitivity, build_core_grid

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_IO = 3

ENV_OUT_DIR = "TRUNCSIM_OUT_DIR"
ENV_THREADS = "TRUNCSIM_THREADS"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="truncsim",
        description="Monte Carlo study of standard analyses for truncated trial outcomes",
    )
    parser.add_argument("--version", action="version", version=f"truncsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a configured grid, write CSVs and figures")
    run.add_argument("config", help="path to a JSON run configuration")

    plot = sub.add_parser("plot", help="render a summary CSV to an SVG chart")
    plot.add_argument("summary", help="path to a summary CSV written by `run`")
    plot.add_argument("--metric", required=True, choices=FIGURE_METRICS)
    plot.add_argument("--out", required=True, help="output SVG path")
    plot.add_argument("--include-extreme", action="store_true",
                      help="keep the extreme grid values (OR 5 / 5 SD)")

    grid = sub.add_parser("grid", help="list the scenarios a grid would contain")
    grid.add_argument("--set", dest="set_tag", default="set1", choices=("set1", "set2"))
    grid.add_argument("--sensitivity", default="core", choices=("core", "A", "B", "C"))
    grid.add_argument("--outcome", default="continuous", choices=("continuous", "binary"))
    grid.add_argument("--print", dest="print_rows", action="store_true",
                      help="print one line per scenario instead of just the count")
    return parser


def _apply_env_overrides(config):
    out_dir = os.environ.get(ENV_OUT_DIR)
    if out_dir:
        config = dataclasses.replace(config, out_dir=out_dir)
    threads = os.environ.get(ENV_THREADS)
    if threads:
        try:
            config = dataclasses.replace(config, threads=max(1, int(threads)))
        except ValueError as exc:
            raise ConfigError(f"{ENV_THREADS} must be an integer: {threads!r}") from exc
    return config


def _cmd_run(args) -> int:
    config = _apply_env_overrides(parse_config(args.config))
    plan = resolve_plan(config)
    out_dir = Path(plan.out_dir)

    summaries = []
    errors: dict[str, str] = {}
    for item in engine.run_grid(plan, progress=lambda line: print(line, file=sys.stderr)):
        if item.error is not None:
            errors[item.scenario.id] = item.error
            continue
        summaries.append(metrics.summarize(item.results, item.scenario))
        if plan.emit_raw:
            report.write_raw(item.scenario, item.results, out_dir)

    if not summaries:
        print("error: every scenario failed", file=sys.stderr)
        return EXIT_RUNTIME

    report.write_summaries(
        summaries,
        out_dir,
        master_seed=plan.master_seed,
        iterations=plan.iterations,
        errors=errors,
    )
    for fig in config.figures:
        groups: dict[tuple[str, str], list] = {}
        for s in summaries:
            key = (s.scenario.sensitivity_tag, s.scenario.outcome_kind)
            groups.setdefault(key, []).append(s)
        for (sensitivity, outcome), group in groups.items():
            if fig.metric == "ror" and outcome != "binary":
                continue
            if fig.metric == "type1":
                group = metrics.type1_slice(group)
                if not group:
                    continue
            figures.emit_figure(
                group,
                fig.metric,
                out_dir / f"fig_{fig.metric}_{sensitivity}_{outcome}.svg",
                include_extreme=fig.include_extreme,
            )
    print(f"wrote {len(summaries)} scenario summaries to {out_dir}")
    if errors:
        for sid, message in errors.items():
            print(f"error in scenario {sid}: {message}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def _cmd_plot(args) -> int:
    if not Path(args.summary).is_file():
        raise OSError(f"summary file not found: {args.summary}")
    figures.emit_figure_csv(
        args.summary, args.metric, args.out, include_extreme=args.include_extreme
    )
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_grid(args) -> int:
    grid = build_core_grid(args.set_tag, args.outcome)
    if args.sensitivity != "core":
        grid = apply_sensitivity(grid, args.sensitivity)
    print(f"{len(grid)} scenarios ({args.set_tag}, {args.sensitivity}, {args.outcome})")
    if args.print_rows:
        for s in grid:
            print(
                f"{s.id}\tn={s.n}\tor_intermediate={s.selection_or:g}"
                f"\teffect_outcome={s.effect_display:g}"
            )
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "plot":
            return _cmd_plot(args)
        return _cmd_grid(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ProfileBracketError, ArithmeticError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    raise SystemExit(main())
