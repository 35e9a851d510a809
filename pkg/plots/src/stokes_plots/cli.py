"""Console entry point: CSV in, log-log figure out.

Exit codes: 0 success, 2 bad inputs (empty CSV, unknown column, malformed
arguments).  On failure no output file is written.
"""

import argparse
import sys

from .figure import PlotSpec, plot_convergence


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="plot",
        description="Render log-log convergence curves from stokes-hybrid "
                    "CSV files.")
    parser.add_argument("--in", dest="inputs", nargs="+", required=True,
                        metavar="CSV", help="one or more CSV files")
    parser.add_argument("--x", choices=("h", "cells"), default="h")
    parser.add_argument("--cols", default="err_u_l2",
                        help="comma-separated error columns")
    parser.add_argument("--slopes", default="",
                        help="comma-separated reference rates (in h)")
    parser.add_argument("--out", required=True, help="output image path")
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        spec = PlotSpec(
            inputs=tuple(args.inputs),
            x=args.x,
            columns=tuple(c for c in args.cols.split(",") if c),
            slopes=tuple(float(s) for s in args.slopes.split(",") if s),
            out=args.out)
        plot_convergence(spec)
    except (ValueError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    print("wrote %s" % args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
