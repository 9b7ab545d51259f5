"""Command line: ``pirough {sig,extend,integrate,solve}``.

Exit codes: 0 ok, 2 input/output, 3 configuration, 4 non-convergence,
5 precondition failure.  A report is written to ``--output`` even when a
command fails after its inputs were read.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import warnings

import numpy as np

from .errors import ConvergenceError, PreconditionError
from .extension import extend_signature
from .grading import GradingSpec, parse_number
from .integrate import defect_certificate, integrate_oneform
from .io import InputError, read_csv_path, read_json, write_json
from .oneform import oneform_from_json
from .path import GridRoughPath, check_finite_pi_variation, control_from_path, lift_path
from .rde import problem_from_json, solve_rde

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_PRECONDITION = 0, 2, 3, 4, 5


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


# -- parsing helpers ------------------------------------------------------------------


def _numbers(text: str, what: str) -> tuple:
    try:
        parts = [t.strip() for t in text.split(",") if t.strip()]
        vals = tuple(parse_number(t) for t in parts)
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        raise ConfigError(f"cannot parse {what} {text!r}: {exc}") from exc
    if not vals:
        raise ConfigError(f"{what} is empty")
    return vals


def parse_pi(text: str) -> tuple:
    vals = _numbers(text, "--pi")
    if any("." in t for t in text.split(",")):
        warnings.warn(
            "decimal entries in --pi are compared with a float tolerance; prefer a/b",
            RuntimeWarning,
            stacklevel=2,
        )
    return vals


def parse_dims(text: str) -> tuple:
    try:
        dims = tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError as exc:
        raise ConfigError(f"cannot parse --dims {text!r}") from exc
    if not dims or any(d < 1 for d in dims):
        raise ConfigError("--dims needs positive integers")
    return dims


def make_spec(args, q=None) -> GradingSpec:
    if args.pi is None or args.dims is None:
        raise ConfigError("--pi and --dims are required for CSV input")
    p, dims = parse_pi(args.pi), parse_dims(args.dims)
    if len(p) != len(dims):
        raise ConfigError(f"--pi has {len(p)} entries but --dims has {len(dims)}")
    q = args.degree if q is None else q
    try:
        return GradingSpec(p, dims, parse_number(q))
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def load_driver(args, q=None) -> GridRoughPath:
    """A driver from CSV (lifted with ``--pi/--dims``) or from path JSON."""
    if args.input.lower().endswith(".csv"):
        spec = make_spec(args, q)
        sp = read_csv_path(args.input)
        if sp.dim != spec.dim:
            raise ConfigError(f"CSV has {sp.dim} coordinates but --dims sums to {spec.dim}")
        return lift_path(sp, spec)
    data = read_json(args.input)
    if isinstance(data, dict) and "path" in data:
        data = data["path"]
    try:
        return GridRoughPath.from_json(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{args.input}: not a rough path JSON ({exc})") from exc


def _sew_summary(rep) -> dict:
    if rep is None:
        return {}
    return {
        "theta": rep.theta,
        "branching": rep.branching,
        "max_depth_used": int(np.max(rep.depth, initial=-1)),
        "raw_distances": list(rep.raw_distances),
        "distances": list(rep.distances),
        "K": rep.K,
    }


def _total(X: GridRoughPath) -> dict:
    return X.chen_eval(X.times[0], X.times[-1]).to_json()


# -- commands ----------------------------------------------------------------------------


def cmd_sig(args, report: dict) -> int:
    X = lift_path(read_csv_path(args.input), make_spec(args)) if args.input.lower().endswith(".csv") else None
    if X is None:
        raise ConfigError("sig reads a CSV path")
    report["path"] = X.to_json()
    report["total"] = _total(X)
    return EXIT_OK


def cmd_extend(args, report: dict) -> int:
    X = load_driver(args, q=1)
    q = parse_number(args.degree)
    Y = extend_signature(X, q, tol=args.tol, max_depth=args.max_depth, certify=True)
    report["path"] = Y.to_json()
    report["total"] = _total(Y)
    rep = Y.report
    if rep is not None:
        omega = control_from_path(X)
        beta = rep.beta_lower if math.isfinite(rep.beta_lower) else rep.beta
        cert = check_finite_pi_variation(Y, omega.scaled(rep.omega_scale or 1.0), beta)
        report["certificate"] = {
            "beta_feasible": rep.beta,
            "beta_lower_bound": rep.beta_lower,
            "omega_scale": rep.omega_scale,
            "passed": bool(rep.passed and cert.passed),
            "max_ratio": cert.max_ratio,
            "levels": [{"degree": str(s), **_sew_summary(r)} for s, r in rep.levels],
        }
    return EXIT_OK


def cmd_integrate(args, report: dict) -> int:
    if not args.form:
        raise ConfigError("integrate needs --form")
    form = read_json(args.form)
    Z = load_driver(args)
    gamma = _numbers(args.gamma, "--gamma") if args.gamma else None
    if gamma is not None:
        form = {**form, "gamma": list(gamma)}
    try:
        alpha = oneform_from_json(form, GradingSpec(Z.spec.p, Z.spec.dims))
    except PreconditionError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad one-form: {exc}") from exc
    report["certificate"] = {"theta": alpha.theta, "precondition_ok": alpha.precondition_ok}
    res = integrate_oneform(alpha, Z, args.tol, max_depth=args.max_depth, seed=args.seed)
    I = res.result
    report["result"] = I.to_json()
    report["total"] = _total(I)
    cert = report["certificate"]
    cert.update(
        {
            "K": res.K_report,
            "alpha_norm": res.alpha_norm,
            "sewing": _sew_summary(res.sewing),
        }
    )
    if Z.N >= 2:
        try:
            dc = defect_certificate(alpha, Z)
            cert["defect_slope"] = dc.slope
            cert["defect_passed"] = dc.passed
        except (ValueError, ConvergenceError) as exc:
            cert["defect_error"] = str(exc)
    return EXIT_OK


def cmd_solve(args, report: dict) -> int:
    if not args.problem:
        raise ConfigError("solve needs --problem")
    data = read_json(args.problem)
    if args.pi is None and "pi" in data:
        args.pi = ",".join(str(v) for v in data["pi"])
    if args.dims is None and "dims" in data:
        args.dims = ",".join(str(v) for v in data["dims"])
    X = load_driver(args, q=1)
    over = {
        "rho": args.rho,
        "tol": args.tol_given,
        "max_iter": args.max_iter,
        "gamma": list(_numbers(args.gamma, "--gamma")) if args.gamma else None,
        "xi": [float(v) for v in _numbers(args.xi, "--xi")] if args.xi else None,
        "refine": args.refine,
        "seed": args.start,
        "degree": args.z_degree,
    }
    data = {**data, **{k: v for k, v in over.items() if v is not None}}
    if "xi" not in data or "f_poly" not in data:
        raise ConfigError("problem needs 'f_poly' and 'xi'")
    try:
        problem = problem_from_json(data, X)
    except PreconditionError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad problem: {exc}") from exc
    sol = solve_rde(problem)
    report["solution"] = sol.to_json()
    report["certificate"] = {
        "M": sol.M,
        "eps": sol.eps,
        "K": sol.K,
        "lip_norm": sol.lip_norm,
        "residual": sol.residual,
        "contraction_slopes": sol.slopes,
        "rho": problem.rho,
        "contraction_passed": bool(all(s <= -0.8 * math.log(problem.rho) for s in sol.slopes)),
    }
    report["Y_T"] = sol.Y()[-1].tolist()
    return EXIT_OK


COMMANDS = {"sig": cmd_sig, "extend": cmd_extend, "integrate": cmd_integrate, "solve": cmd_solve}


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="pirough", description="Rough paths with inhomogeneous roughness")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--input", required=True)
        p.add_argument("--output", required=True)
        p.add_argument("--pi")
        p.add_argument("--dims")
        p.add_argument("--degree", default="1")
        p.add_argument("--tol", type=float, default=1e-10)
        p.add_argument("--max-depth", type=int, default=20)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--gamma")

    common(sub.add_parser("sig", help="lift a CSV path"))
    common(sub.add_parser("extend", help="extend a degree-1 path to --degree"))
    p = sub.add_parser("integrate", help="integrate a one-form along a path")
    common(p)
    p.add_argument("--form")
    p = sub.add_parser("solve", help="solve dY = f(X, Y) dX")
    common(p)
    p.add_argument("--problem")
    p.add_argument("--rho", type=float)
    p.add_argument("--xi")
    p.add_argument("--max-iter", type=int)
    p.add_argument("--refine", type=int)
    p.add_argument("--z-degree")
    p.add_argument("--start", choices=("zero", "euler"))
    return ap


def run(argv=None) -> int:
    report: dict = {}
    out = None
    try:
        ap = build_parser()
        raw = list(sys.argv[1:] if argv is None else argv)
        args = ap.parse_args(raw)
        args.tol_given = args.tol if "--tol" in raw else None
        out = args.output
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
        report["command"] = args.command
        code = COMMANDS[args.command](args, report)
        report["status"] = "ok"
    except PreconditionError as exc:
        code = _fail(report, EXIT_PRECONDITION, exc)
    except ConvergenceError as exc:
        report["distances"] = list(exc.distances)
        code = _fail(report, EXIT_CONVERGENCE, exc)
    except InputError as exc:
        code = _fail(report, EXIT_IO, exc)
    except (ConfigError, ValueError, KeyError, TypeError) as exc:
        code = _fail(report, EXIT_CONFIG, exc)
    if out is not None:
        try:
            write_json(out, report)
        except InputError as exc:
            print(f"pirough: {exc}", file=sys.stderr)
            return EXIT_IO
    return code


def _fail(report: dict, code: int, exc: Exception) -> int:
    print(f"pirough: {exc}", file=sys.stderr)
    report["status"] = "error"
    report["exit_code"] = code
    report["error"] = str(exc)
    return code


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
