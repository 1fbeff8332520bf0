"""Command-line interface: single runs, convergence tables and the property self-test.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from .config import ConfigError, parse_config
from .linsolve import SolverError
from .study import StudyError, run_study

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

# CLI flag -> config key
FLAG_KEYS = {
    "case": "case", "grids": "grids", "dts": "dts", "theta": "time.theta", "T": "time.T", "methods": "methods",
    "c1": "stab.c1", "c2": "stab.c2", "c3": "stab.c3", "subscale_mode": "stab.subscale_mode",
    "subscale_terms": "stab.subscale_terms", "tau_scale": "stab.tau_scale", "subscale_history": "stab.subscale_history",
    "solver": "solver.method", "tol": "solver.tol", "max_iters": "solver.max_iters",
    "pressure_fix": "solver.pressure_fix", "picard_iters": "picard_iters",
    "pressure_penalty": "galerkin.pressure_penalty", "jobs": "jobs", "out": "out",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _study_options(p, single=False):
    p.add_argument("--config", help="key = value file; command-line flags take precedence")
    p.add_argument("--case", help="I-a, I-b, I-c, II-a or II-b")
    p.add_argument("--theta", help="1 = backward Euler (default), 0 = Crank-Nicolson")
    p.add_argument("--T", help="final time (default 1)")
    if single:
        p.add_argument("--n", type=int, default=10, help="subdivisions per side")
        p.add_argument("--dt", type=float, default=0.1)
        p.add_argument("--method", default="asgs", choices=("galerkin", "asgs"))
    else:
        p.add_argument("--grids", help="comma-separated, doubling (default 10,20,40,80)")
        p.add_argument("--dts", help="comma-separated time steps paired with --grids (default 0.1 halving)")
        p.add_argument("--methods", help="comma-separated subset of galerkin,asgs")
        p.add_argument("--out", help="CSV output path")
        p.add_argument("--jobs", help="worker processes for independent cells")
    p.add_argument("--c1")
    p.add_argument("--c2")
    p.add_argument("--c3")
    p.add_argument("--subscale-mode", dest="subscale_mode", help="dynamic (default) or quasistatic")
    p.add_argument("--subscale-terms", dest="subscale_terms", help="truncate the subscale series (default: limit)")
    p.add_argument("--tau-scale", dest="tau_scale")
    p.add_argument("--subscale-history", dest="subscale_history", help="tracked (default) or implicit")
    p.add_argument("--solver", help="direct (default) or bicgstab")
    p.add_argument("--tol")
    p.add_argument("--max-iters", dest="max_iters")
    p.add_argument("--pressure-fix", dest="pressure_fix", help="pin-node (default) or mean-shift")
    p.add_argument("--picard-iters", dest="picard_iters")
    p.add_argument("--pressure-penalty", dest="pressure_penalty", help="Galerkin eps*(p,q) weight")
    p.add_argument("--estimate", action="store_true", help="report the residual indicator eta per level")
    p.add_argument("--timing", action="store_true", help="fill the walltime_s CSV column")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="raw config override")


def build_parser():
    parser = _Parser(prog="asgsflow", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    _study_options(sub.add_parser("run", help="one grid, one method"), single=True)
    _study_options(sub.add_parser("converge", help="convergence table as CSV"))
    _study_options(sub.add_parser("compare", help="side-by-side Galerkin/ASGS table"))
    sub.add_parser("selftest", help="fast property suite")
    return parser


def _overrides(args, single=False):
    out = {}
    for flag, key in FLAG_KEYS.items():
        val = getattr(args, flag, None)
        if val is not None:
            out[key] = str(val)
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    if args.estimate:
        out["estimate"] = "true"
    if args.timing:
        out["timing"] = "true"
    if single:
        out.update({"grids": str(args.n), "dts": repr(args.dt), "methods": args.method})
    return out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "selftest":
        from .selftest import run_all

        return EXIT_OK if all(r.passed for r in run_all()) else EXIT_NUMERIC
    try:
        config = parse_config(args.config, _overrides(args, single=args.command == "run"))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        report = run_study(config)
    except (StudyError, SolverError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    if args.command == "run":
        row = report.rows[0]
        print(f"case {row.case} {row.method} {row.n_div}x{row.n_div} dt={row.dt:g} theta={row.theta}")
        print(f"  total error {row.total_error:.6g}  (u {row.tildeV_u:.4g}, p {row.L2L2_p:.4g}, c {row.tildeV_c:.4g})")
        if row.eta is not None:
            print(f"  eta {row.eta:.6g}")
    elif args.command == "compare":
        print(report.format_table())
    else:
        if config.out is None:
            sys.stdout.write(report.to_csv())
        else:
            with open(config.out, "w", newline="") as fh:
                fh.write(report.to_csv())
            print(report.format_table())
    if args.command != "converge" and config.out:
        with open(config.out, "w", newline="") as fh:
            fh.write(report.to_csv())
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
