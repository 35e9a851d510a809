"""Command line interface.

Subcommands: convergence (refinement study to CSV), robustness (paired
viscosity runs to CSV), verify (built-in self checks), dump-mesh, and
dump-matrix. Exit codes: 0 success, 1 numerical failure (solver residual,
incompatible datum, failed verification), 2 invalid arguments.

Numeric CSV fields are written with repr(), the shortest digit string that
round-trips the double; rate columns are empty on the coarsest level. The
environment variable STOKES_HYBRID_THREADS sets the assembly worker count
(default 1; results are identical for any value).
"""

import argparse
import sys

import numpy as np
import scipy.io

from .assembly import CompatibilityError, assemble
from .cases import get_case, run_convergence, run_pressure_robustness
from .mesh import cracked_square_mesh, dump_mesh, lshape_mesh, refine_uniform, unit_square_mesh
from .solver import SolverError, build_condensed_system
from .spaces import MethodConfig, build_spaces, interpolate_facet_dirichlet
from .verification import run_verification

CASES = ("square-mr", "lshape", "crack")
MESH_FAMILIES = {
    "unit-square": unit_square_mesh,
    "lshape": lshape_mesh,
    "crack": cracked_square_mesh,
}
ROBUSTNESS_DIFF_KEY = "max_rel_edg_hdg_velocity_diff"


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _alpha_arg(text):
    if text == "auto":
        return None
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("alpha must be a number or 'auto'")
    return value


def _write_convergence_csv(stream, report, prefix=()):
    cols = report.CSV_COLUMNS
    if not prefix:
        stream.write(",".join(cols) + "\n")
    for row in report.table():
        cells = [_fmt(v) for v in prefix] + [_fmt(row[c]) for c in cols]
        stream.write(",".join(cells) + "\n")


def _open_out(path):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w"), True


def cmd_convergence(args):
    case = get_case(args.case, nu=args.nu)
    cfg = MethodConfig(method=args.method, degree=args.degree, nu=args.nu,
                       alpha=args.alpha)
    report = run_convergence(case, cfg, levels=args.levels, n0=args.n0)
    stream, close = _open_out(args.out)
    try:
        _write_convergence_csv(stream, report)
    finally:
        if close:
            stream.close()
    if close:
        _print_convergence_table(report)
        print("wrote %s" % args.out)
    return 0


def _print_convergence_table(report):
    cols = ("level", "cells", "h", "err_u_l2", "rate_u_l2", "err_u_energy",
            "rate_u_energy", "err_p_l2", "rate_p_l2")
    rows = [[_table_cell(r[c]) for c in cols] for r in report.table()]
    widths = [max(len(c), *(len(row[i]) for row in rows))
              for i, c in enumerate(cols)]
    print("case=%s method=%s degree=%d nu=%g alpha=%g"
          % (report.case, report.method, report.degree, report.nu, report.alpha))
    print("  ".join(c.rjust(w) for c, w in zip(cols, widths)))
    for row in rows:
        print("  ".join(v.rjust(w) for v, w in zip(row, widths)))


def _table_cell(v):
    if v is None:
        return "-"
    if isinstance(v, float):
        return "%.3e" % v if abs(v) < 1e-2 or abs(v) >= 1e3 else "%.3f" % v
    return str(v)


def cmd_robustness(args):
    nus = tuple(float(s) for s in args.nus.split(","))
    methods = tuple(args.methods.split(","))
    rob = run_pressure_robustness(degree=args.degree, levels=args.levels,
                                  n0=args.n0, nus=nus, methods=methods)
    stream, close = _open_out(args.out)
    try:
        stream.write("method,nu," + ",".join(rob.blocks[0][2].CSV_COLUMNS) + "\n")
        for method, nu, report in rob.blocks:
            _write_convergence_csv(stream, report, prefix=(method, nu))
        stream.write("# %s=%s\n" % (ROBUSTNESS_DIFF_KEY, _fmt(rob.max_rel_velocity_diff)))
    finally:
        if close:
            stream.close()
    print("%s=%s" % (ROBUSTNESS_DIFF_KEY, _fmt(rob.max_rel_velocity_diff)))
    return 0


def cmd_verify(args):
    methods = (args.method,) if args.method != "all" else ("hdg", "edg-hdg", "edg")
    degrees = (args.degree,) if args.degree != 0 else (1, 2)
    results = run_verification(methods=methods, degrees=degrees,
                               alpha=args.alpha, seed=args.seed)
    failed = 0
    for res in results:
        print("%s %s: %s" % ("PASS" if res.passed else "FAIL", res.name, res.detail))
        failed += not res.passed
    print("%d/%d checks passed" % (len(results) - failed, len(results)))
    return 1 if failed else 0


def cmd_dump_mesh(args):
    mesh = MESH_FAMILIES[args.family](args.n)
    for _ in range(args.refine):
        mesh = refine_uniform(mesh)
    stream, close = _open_out(args.out)
    try:
        dump_mesh(mesh, stream)
    finally:
        if close:
            stream.close()
    return 0


def cmd_dump_matrix(args):
    case = get_case(args.case, nu=args.nu)
    cfg = MethodConfig(method=args.method, degree=args.degree, nu=args.nu,
                       alpha=args.alpha)
    mesh = case.make_mesh(args.n)
    for _ in range(args.refine):
        mesh = refine_uniform(mesh)
    spaces = build_spaces(mesh, cfg)
    bc = interpolate_facet_dirichlet(case, mesh, spaces.facet_velocity)
    if args.form == "condensed":
        cond = build_condensed_system(mesh, cfg, spaces, f=case.body_force, bc=bc)
        matrix, rhs = cond.matrix, cond.rhs
    else:
        system = assemble(mesh, cfg, spaces, f=case.body_force, bc=bc)
        matrix, rhs = system.matrix, system.rhs
    scipy.io.mmwrite(args.out, matrix)
    if args.rhs:
        with open(args.rhs, "w") as fh:
            for v in rhs:
                fh.write(repr(float(v)) + "\n")
    print("wrote %s: %d x %d, %d nonzeros" % (args.out, matrix.shape[0],
                                              matrix.shape[1], matrix.nnz))
    return 0


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="stokes-hybrid",
        description="Hybridized discontinuous Galerkin benchmarks for the "
                    "Stokes problem on triangular meshes, including cracked "
                    "domains.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_method_args(p):
        p.add_argument("--method", choices=("hdg", "edg-hdg", "edg"), required=True)
        p.add_argument("--degree", type=int, choices=(1, 2), required=True)
        p.add_argument("--nu", type=float, default=1.0, help="viscosity")
        p.add_argument("--alpha", type=_alpha_arg, default="auto",
                       help="interior penalty parameter, 'auto' means 6 k^2")

    p = sub.add_parser("convergence", help="uniform refinement study")
    p.add_argument("--case", choices=CASES, required=True)
    add_method_args(p)
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--n0", type=int, default=None,
                   help="subdivisions of the coarsest mesh (case default otherwise)")
    p.add_argument("--out", default=None, help="CSV path, '-' or absent for stdout")
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("robustness", help="viscosity-independence study")
    p.add_argument("--degree", type=int, choices=(1, 2), default=1)
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--n0", type=int, default=None)
    p.add_argument("--nus", default="1.0,1e-5", help="comma-separated viscosities")
    p.add_argument("--methods", default="edg,edg-hdg")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_robustness)

    p = sub.add_parser("verify", help="built-in self checks")
    p.add_argument("--method", choices=("hdg", "edg-hdg", "edg", "all"), default="all")
    p.add_argument("--degree", type=int, choices=(0, 1, 2), default=0,
                   help="0 runs both degrees")
    p.add_argument("--alpha", type=_alpha_arg, default="auto")
    p.add_argument("--seed", type=int, default=0,
                   help="base seed for the randomized coercivity probe")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("dump-mesh", help="write a mesh as plain text")
    p.add_argument("--family", choices=sorted(MESH_FAMILIES), required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--refine", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_dump_mesh)

    p = sub.add_parser("dump-matrix", help="write a system matrix (MatrixMarket)")
    p.add_argument("--case", choices=CASES, required=True)
    add_method_args(p)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--refine", type=int, default=0)
    p.add_argument("--form", choices=("full", "condensed"), default="full")
    p.add_argument("--out", required=True)
    p.add_argument("--rhs", default=None, help="also write the right-hand side")
    p.set_defaults(func=cmd_dump_matrix)

    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SolverError, CompatibilityError) as exc:
        print("numerical failure: %s" % exc, file=sys.stderr)
        return 1
    except (ValueError, KeyError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
