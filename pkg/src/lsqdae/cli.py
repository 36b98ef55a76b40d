"""Command-line interface: ``lsqdae {solve,study,sv-scan,validate}``.

Exit codes: 0 success, 2 argument error, 3 numerical failure, 4 partial study.
"""

from __future__ import annotations

import argparse
import json
import sys as _sys
from pathlib import Path

import numpy as np

from .errors import ArgumentError, DomainError, LsqDaeError, NumericalError

EXIT_OK, EXIT_ARGS, EXIT_NUMERICAL, EXIT_PARTIAL = 0, 2, 3, 4


def _n_list(text: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad --n-list {text!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("--n-list is empty")
    return vals


def _common(p: argparse.ArgumentParser, n_list_default: str = "10,20,40"):
    p.add_argument("--problem", default="pendulum",
                   help="pendulum | campbell-moore | chain:MU | manufactured")
    p.add_argument("--N", type=int, default=3, help="polynomial degree of the differential components")
    p.add_argument("--M", type=int, default=None, help="collocation points per subinterval (default N+1)")
    p.add_argument("--nodes", default="uniform", choices=["uniform", "gauss"])
    p.add_argument("--n-list", type=_n_list, default=_n_list(n_list_default))
    p.add_argument("--bc-weight", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lsqdae", description="Least-squares collocation for nonlinear DAEs")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve on one mesh (first entry of --n-list) or a multilevel chain")
    _common(p, "10")
    p.add_argument("--multilevel", action="store_true", help="refine through all of --n-list")
    p.add_argument("--q-inverse", type=int, default=2)
    p.add_argument("--init", default="interpolate_reference", choices=["interpolate_reference", "zero", "file"])
    p.add_argument("--init-file", type=Path, default=None)
    p.add_argument("--trace", type=Path, default=None, help="write the Gauss-Newton trace as JSON lines")
    p.add_argument("--dump-system", type=Path, default=None,
                   help="write the final linearized system as Matrix Market files")

    p = sub.add_parser("study", help="convergence study over --n-list")
    _common(p)
    p.add_argument("--multilevel", action="store_true")
    p.add_argument("--q-inverse", type=int, default=2)
    p.add_argument("--init", default="interpolate_reference", choices=["interpolate_reference", "zero", "file"])
    p.add_argument("--init-file", type=Path, default=None)
    p.add_argument("--format", default="csv", choices=["csv", "markdown"])
    p.add_argument("--orders", action="store_true", help="append order columns to the CSV")

    p = sub.add_parser("sv-scan", help="smallest singular value of the Jacobian versus h")
    _common(p, "16,32,64,128")
    p.add_argument("--norm", default="h1d", choices=["h1d", "l2", "coeff"])
    p.add_argument("--format", default="csv", choices=["csv", "markdown"])

    p = sub.add_parser("validate", help="compare analytic Jacobians with finite differences")
    p.add_argument("--problem", default="pendulum")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--out", type=Path, default=None)
    return parser


def _emit(text: str, out: Path | None):
    if out is None:
        _sys.stdout.write(text)
    else:
        out.write_text(text)


def _problem(args):
    from .problems import get_problem

    # the manufactured problem is built for the requested (N, coarsest n) space
    return get_problem(args.problem, seed=args.seed, N=args.N, n=args.n_list[0])


def _cmd_solve(args) -> int:
    from .collocation import assemble, dump_system, make_scheme
    from .gauss_newton import Termination, gn_solve
    from .mesh import AnsatzSpace, make_uniform_partition
    from .metrics import error_norms, initial_element
    from .multilevel import MultilevelConfig, multilevel_solve

    prob = _problem(args)
    sys = prob.sys
    M = args.M if args.M is not None else args.N + 1
    scheme = make_scheme(M, args.nodes, N=args.N, bc_weight=args.bc_weight)
    space = AnsatzSpace(make_uniform_partition(sys.a, sys.b, args.n_list[0]), args.N, sys.m, sys.k)
    x0 = initial_element(space, prob, args.init, args.init_file)
    if args.multilevel:
        results = multilevel_solve(sys, scheme, space, x0,
                                   MultilevelConfig(levels=len(args.n_list), q_inverse=args.q_inverse))
        levels = [(r.element, r.trace) for r in results]
    else:
        levels = [gn_solve(sys, scheme, x0)]
    if args.trace is not None:
        args.trace.write_text("".join(t.to_jsonl() for _, t in levels))
    elem, trace = levels[-1]
    summary = {"problem": prob.name, "N": args.N, "M": M, "nodes": scheme.short_name,
               "levels": [{"n": e.space.n, "psi_final": t.psi_final, "gn_iters": t.iterations,
                           "termination": t.termination.value} for e, t in levels]}
    if sys.reference_solution is not None and trace.termination != Termination.NUMERICAL_ERROR:
        rep = error_norms(elem, sys)
        summary["errors_l2"] = rep.l2.tolist()
        summary["error_h1d"] = rep.h1d
    if args.dump_system is not None:
        dump_system(args.dump_system, assemble(sys, elem, scheme))
    if args.out is not None:
        elem.save(args.out)
    _sys.stdout.write(json.dumps(summary, indent=2) + "\n")
    return EXIT_NUMERICAL if trace.termination == Termination.NUMERICAL_ERROR else EXIT_OK


def _cmd_study(args) -> int:
    from .metrics import run_convergence_study

    prob = _problem(args)
    M = args.M if args.M is not None else args.N + 1
    study = run_convergence_study(prob, args.N, M, args.nodes, args.n_list, init=args.init,
                                  multilevel=args.multilevel, q_inverse=args.q_inverse,
                                  bc_weight=args.bc_weight, init_file=args.init_file)
    text = study.to_markdown() if args.format == "markdown" else study.to_csv(orders=args.orders)
    _emit(text, args.out)
    if not study.failed:
        return EXIT_OK
    return EXIT_NUMERICAL if len(study.failed) == len(study.rows) else EXIT_PARTIAL


def _cmd_sv_scan(args) -> int:
    from .metrics import run_sv_scan

    prob = _problem(args)
    M = args.M if args.M is not None else args.N + 1
    scan = run_sv_scan(prob, args.N, M, args.nodes, args.n_list, norm=args.norm, bc_weight=args.bc_weight)
    _emit(scan.to_markdown() if args.format == "markdown" else scan.to_csv(), args.out)
    return EXIT_OK


def _cmd_validate(args) -> int:
    from .dae import validate_jacobians
    from .problems import get_problem

    prob = get_problem(args.problem, seed=args.seed)
    rep = validate_jacobians(prob.sys, samples=args.samples, seed=args.seed)
    out = {"problem": prob.name, "deviation": rep["deviation"], "samples": rep["samples"],
           "tol": args.tol, "ok": bool(rep["deviation"] <= args.tol)}
    _emit(json.dumps(out, indent=2) + "\n", args.out)
    return EXIT_OK if out["ok"] else EXIT_NUMERICAL


COMMANDS = {"solve": _cmd_solve, "study": _cmd_study, "sv-scan": _cmd_sv_scan, "validate": _cmd_validate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:          # argparse exits 2 on bad arguments, 0 on --help
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except ArgumentError as exc:
        _sys.stderr.write(f"error: {exc}\n")
        return EXIT_ARGS
    except (NumericalError, DomainError, np.linalg.LinAlgError) as exc:
        _sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERICAL
    except (LsqDaeError, OSError) as exc:
        _sys.stderr.write(f"error: {exc}\n")
        return EXIT_ARGS


if __name__ == "__main__":
    raise SystemExit(main())
