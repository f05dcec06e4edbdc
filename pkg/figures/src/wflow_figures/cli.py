"""wflow-figures render --figure ID --in GLOB --out PATH [--arrows]"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import EXPECTED_COLUMNS, PlotSpec, ValidationError, render

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> _Parser:
    parser = _Parser(prog="wflow-figures")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="render one figure from trace CSVs")
    p.add_argument("--figure", required=True, choices=sorted(EXPECTED_COLUMNS))
    p.add_argument("--in", dest="inputs", required=True,
                   help="glob pattern over trace CSVs")
    p.add_argument("--out", type=Path, required=True, help="image path to write")
    p.add_argument("--arrows", action="store_true",
                   help="draw direction-of-time arrows on phase plots")
    return parser


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    spec = PlotSpec(figure_id=args.figure, inputs=args.inputs,
                    out_path=args.out, arrows=args.arrows)
    try:
        path = render(spec)
    except ValidationError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    print(path)
    return EXIT_OK


def main() -> None:
    raise SystemExit(cli_main())
