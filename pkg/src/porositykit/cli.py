"""``analyze`` command line entry point.

Exit codes: 0 when every requested analysis is conclusive, 2 when some
analysis is inconclusive at the chosen window, 1 on errors.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .exact import ConfigurationError, PorosityError
from .report import ANALYSES, load_config, run, thread_count, write_report

log = logging.getLogger("porositykit")


class _Parser(argparse.ArgumentParser):
    # exit code 2 is reserved for inconclusive runs
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="analyze",
        description="Porosity, pretangent-space and derivative analyses of a subset of [0, inf) at 0.",
    )
    p.add_argument("--config", required=True, help="JSON analysis config")
    p.add_argument("--window", help="tail window N0:N (default from config, else 32:256)")
    p.add_argument("--tol", help="convergence tolerance as p/q or a decimal")
    p.add_argument("--cap", type=int, help="element enumeration cap")
    p.add_argument("--out", default="report", help="output directory (default: ./report)")
    p.add_argument("--no-plots", action="store_true", help="skip the PNG figures")
    p.add_argument("--timing", action="store_true", help="record wall times (reports are then not byte-stable)")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("analyses", nargs="*", metavar="analysis", help=f"any of: {', '.join(ANALYSES)}")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    bad = [a for a in args.analyses if a not in ANALYSES]
    if bad:
        parser.error(f"unknown analysis {bad[0]!r}; choose from {', '.join(ANALYSES)}")
    try:
        cfg = load_config(args.config, window=args.window, tol=args.tol, cap=args.cap, analyses=args.analyses)
        threads = thread_count()
    except ConfigurationError as exc:
        print(f"analyze: {exc}", file=sys.stderr)
        return 1
    try:
        report = run(cfg, threads)
    except PorosityError as exc:
        print(f"analyze: {exc}", file=sys.stderr)
        return 1
    paths = write_report(report, args.out, timing=args.timing)
    if not args.no_plots:
        from .plotting import render  # matplotlib is slow to import

        paths["figures"] = [str(p) for p in render(report, args.out)]
    print(report.table())
    log.info("wrote %s", ", ".join(str(v) for v in paths.values()))
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
