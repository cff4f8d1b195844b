"""Command line entry point: ``quadcoarse run`` and ``quadcoarse stats``."""

from __future__ import annotations

import argparse
import logging
import math
import sys

from .errors import QuadCoarseError
from .highorder import SPACINGS
from .pipeline import STATS_COLUMNS, PipelineConfig, read_stats, run_pipeline
from .simplex import Budget


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="quadcoarse", description="Coarsen a quad mesh into a high-order quad layout.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the full pipeline")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="quad mesh file (native or .obj)")
    src.add_argument("--generate", help="generator spec, e.g. 'grid(4,4)' or 'ellipse_fig2'")
    run.add_argument("--alpha", type=float, default=math.pi / 4, help="trace cone half-angle in radians")
    run.add_argument("--order", type=int, default=5, help="Lagrange order N")
    run.add_argument("--spacing", choices=SPACINGS, default="eq")
    run.add_argument("--no-collapse-35", dest="collapse_35", action="store_false")
    run.add_argument("--stop-rule", choices=("one", "two"), default="one")
    run.add_argument("--max-iters", type=int, default=None, help="smoothing iteration cap")
    run.add_argument("--tol", type=float, default=None, help="smoothing displacement tolerance")
    run.add_argument("--max-nodes", type=int, default=Budget.max_nodes, help="branch-and-bound node budget")
    run.add_argument("--time-limit", type=float, default=Budget.time_limit, help="ILP time budget in seconds")
    run.add_argument("--dump-all", action="store_true", help="write every intermediate artifact")
    run.add_argument("--out", required=True, help="output directory")

    stats = sub.add_parser("stats", help="print the stats row of a finished run")
    stats.add_argument("path", help="output directory or stats.csv file")
    stats.add_argument("--header", action="store_true")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "stats":
            st = read_stats(args.path)
            if args.header:
                print(",".join(STATS_COLUMNS))
            print(st.csv_row())
            return 0
        config = PipelineConfig(
            input=args.input,
            generate=args.generate,
            alpha=args.alpha,
            order=args.order,
            spacing=args.spacing,
            collapse_35=args.collapse_35,
            stop_rule=args.stop_rule,
            max_iters=args.max_iters,
            tol=args.tol,
            budget=Budget(args.max_nodes, args.time_limit),
            out=args.out,
            dump_all=args.dump_all,
        )
        result = run_pipeline(config)
    except QuadCoarseError as err:
        phase = getattr(err, "phase", None)
        where = f" during {phase}" if phase else ""
        print(f"quadcoarse: {type(err).__name__}{where}: {err}", file=sys.stderr)
        return err.exit_code
    print(",".join(STATS_COLUMNS))
    print(result.stats.csv_row())
    print(result.stats.summary())
    print(result.quality.table())
    if not result.smoothing.converged:
        print(f"warning: smoothing stopped after {result.smoothing.iterations} iterations without converging")
    return 0


if __name__ == "__main__":
    sys.exit(main())
