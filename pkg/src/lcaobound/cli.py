"""Command-line entry point.

Exit codes: 0 on success, 2 for configuration errors, 3 when a numerical
kernel or a hypothesis of the bounds fails (including failed sweep points).
"""
from __future__ import annotations

import argparse
import sys
import warnings
from typing import Optional, Sequence

from .driver import CA_MODES, KINDS, REMAINDER_RULES, load_config, run_experiment, write_table
from .errors import AssumptionError, ConfigError, NumericalError
from .estimator import GAP_MODES

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="flat key=value configuration file")
    common.add_argument("--out", default="-", help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--gap-mode", choices=GAP_MODES, default=None,
                        help="source of the lower bound for the second eigenvalue")
    common.add_argument("--ca-mode", choices=CA_MODES, default=None)
    common.add_argument("--remainder", choices=REMAINDER_RULES, default=None,
                        help="eigenvalue scaling the unresolved spectral remainder")
    common.add_argument("--threads", type=int, default=None)

    parser = _Parser(prog="lcaobound", description="Error bounds for LCAO discretisations of 1D Schrodinger problems.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for kind in KINDS:
        sub.add_parser(kind, parents=[common])
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        # the subcommand decides the experiment kind, whatever the file says
        overrides = {"kind": args.command, "gap_mode": args.gap_mode, "ca_mode": args.ca_mode,
                     "remainder": args.remainder, "threads": args.threads}
        cfg = load_config(args.config, **overrides)
        with warnings.catch_warnings():
            warnings.simplefilter("once")
            table = run_experiment(cfg)
        write_table(table, args.out, args.format)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, AssumptionError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    if table.failed:
        print(f"{len(table.failed)} of {len(table.rows)} points failed; see the error column",
              file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
