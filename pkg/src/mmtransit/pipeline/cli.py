"""Command-line entry point: ``mmtransit VERB --config PATH [options]``.

Exit codes: 0 success, 2 infeasible model or unreachable demand, 3 input
error, 1 anything else.
"""
from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

from ..zonal import InfeasibleModelError, UnreachableDemandError
from .config import load_config
from .scenario import STAGES, StageError, run_scenario, run_stage

EXIT_OK, EXIT_FAIL, EXIT_INFEASIBLE, EXIT_INPUT = 0, 1, 2, 3

_HELP = {
    "cluster": "cluster MAZs into zones and aggregate demand",
    "links": "enumerate candidate links and import existing lines",
    "costs": "price every arc of the zonal network",
    "optimize": "solve the zonal connection MILP",
    "routes": "chain link segments into routes (MILP and myopic)",
    "report": "write scenario tables and per-origin mode splits",
    "pipeline": "run every stage in order",
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mmtransit",
                                description="Multimodal transit network design pipeline.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="verb", required=True, metavar="VERB")
    for verb in STAGES + ("pipeline",):
        s = sub.add_parser(verb, help=_HELP[verb], description=_HELP[verb])
        s.add_argument("--config", required=True, help="scenario TOML file")
        s.add_argument("--seed", type=int, help="clustering seed")
        s.add_argument("--budget", help="infrastructure budget, e.g. 5e8 or '500 M$'")
        s.add_argument("--gap", type=float, help="relative MILP gap to stop at")
        s.add_argument("--time-limit", type=float, dest="time_limit",
                       help="solver time limit in seconds")
        s.add_argument("--solver", help="builtin or external:CMD")
        s.add_argument("--out", help="output directory")
    return p


def exit_code(exc: BaseException) -> int:
    cause = exc.cause if isinstance(exc, StageError) else exc
    if isinstance(cause, (InfeasibleModelError, UnreachableDemandError)):
        return EXIT_INFEASIBLE
    if isinstance(cause, (ValueError, OSError)):
        return EXIT_INPUT
    return EXIT_FAIL


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config).with_overrides(
            seed=args.seed, budget=args.budget, gap=args.gap, time_limit=args.time_limit,
            solver=args.solver, out=args.out)
        if args.verb == "pipeline":
            res = run_scenario(cfg)
            files = res.files
        else:
            files = run_stage(cfg, args.verb)
    except Exception as exc:  # reported with an exit code
        print(f"mmtransit {args.verb}: {exc}", file=sys.stderr)
        if args.verbose > 1:
            raise
        return exit_code(exc)
    for name in sorted(files):
        print(files[name])
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
