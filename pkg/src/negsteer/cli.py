"""Command-line front end for the experiment harness.

Verbs:
    run      execute one configured batch and persist its artifacts
    compare  print a metrics table across stored runs
    figures  emit PCA scatter / KDE grid / agreement-curve data files
    ablate   expand one config into the five controller modes and run all

Exit codes: 0 success, 2 config error, 3 run failure, 4 missing replay source.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import ConfigError, IncompatibleRuns, MissingReplaySource, NegsteerError
from .harness import RunConfig, ablate, compare, emit_figures, load_run, run_experiment

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUN = 3
EXIT_REPLAY = 4


def _parse_seeds(text: str) -> tuple[int, ...]:
    """'0-99' or '0,5,7' or '42'."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return tuple(out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="negsteer", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="execute one configured batch")
    p_run.add_argument("config", help="path to a run config file")
    p_run.add_argument("--mode", help="override the config's controller mode")
    p_run.add_argument("--seeds", help="override seeds, e.g. 0-199 or 1,2,3")
    p_run.add_argument("--out", help="override the run store directory")

    p_cmp = sub.add_parser("compare", help="tabulate metrics across stored runs")
    p_cmp.add_argument("run_ids", nargs="+")
    p_cmp.add_argument("--store", default="runs", help="run store directory")
    p_cmp.add_argument("--csv", help="also write the table to this CSV path")

    p_fig = sub.add_parser("figures", help="emit figure data for stored runs")
    p_fig.add_argument("run_ids", nargs="+")
    p_fig.add_argument("--store", default="runs", help="run store directory")
    p_fig.add_argument("--out", default="figures", help="output directory")

    p_abl = sub.add_parser("ablate", help="run all five controller modes")
    p_abl.add_argument("config", help="path to a run config file")
    p_abl.add_argument("--seeds", help="override seeds, e.g. 0-99")
    p_abl.add_argument("--out", help="override the run store directory")

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except (ConfigError, IncompatibleRuns) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingReplaySource as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_REPLAY
    except NegsteerError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUN


def _dispatch(args: argparse.Namespace) -> int:
    if args.verb == "run":
        overrides = {}
        if args.mode:
            overrides["mode"] = args.mode
        if args.seeds:
            overrides["seeds"] = _parse_seeds(args.seeds)
        if args.out:
            overrides["out"] = args.out
        config = RunConfig.from_file(args.config, **overrides)
        artifacts = run_experiment(config)
        print(artifacts.run_id)
        if artifacts.failures:
            print(f"{len(artifacts.failures)} seed(s) failed; see manifest", file=sys.stderr)
            return EXIT_RUN
        return EXIT_OK

    if args.verb == "compare":
        runs = [load_run(rid, args.store) for rid in args.run_ids]
        table = compare(runs)
        print(table.render())
        if args.csv:
            table.to_csv(args.csv)
        return EXIT_OK

    if args.verb == "figures":
        runs = [load_run(rid, args.store) for rid in args.run_ids]
        written = emit_figures(runs, Path(args.out))
        for path in sorted(written.values()):
            print(path)
        return EXIT_OK

    if args.verb == "ablate":
        overrides = {}
        if args.seeds:
            overrides["seeds"] = _parse_seeds(args.seeds)
        if args.out:
            overrides["out"] = args.out
        config = RunConfig.from_file(args.config, **overrides)
        results = ablate(config)
        table = compare(results)
        print(table.render())
        if any(r.failures for r in results):
            return EXIT_RUN
        return EXIT_OK

    raise ConfigError(f"unknown verb {args.verb!r}")


if __name__ == "__main__":
    sys.exit(main())
