"""Command-line front end.

Exit codes: 0 success, 1 assumption/bound check failed, 2 singular
system, 3 expression error, 4 solver did not converge, 5 bad flags.
"""
from __future__ import annotations

import argparse
import io
import json
import sys

import numpy as np

from . import analysis
from . import expr as ex
from . import nonlinearity as nlmod
from .solver import (
    AssumptionError,
    ConvergenceError,
    DiscreteBVP,
    NewtonConfig,
    SingularSystemError,
    newton_solve,
)

EXIT_OK = 0
EXIT_ASSUMPTION = 1
EXIT_SINGULAR = 2
EXIT_PARSE = 3
EXIT_NO_CONVERGENCE = 4
EXIT_BAD_FLAGS = 5

H1_TEXT = "f(t,0) ≠ 0 for t∈[0,1]"
H2_TEXT = "f nondecreasing in x for all t∈[0,1]"
H2A_TEXT = "f(t,x) ≤ a + b|x|^γ"


class BadFlags(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise BadFlags(message)


def _int_list(text):
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}")


def _add_nonlinearity_flags(p):
    g = p.add_argument_group("nonlinearity")
    g.add_argument("--name", help=f"catalogue entry: {', '.join(nlmod.CATALOGUE)}")
    g.add_argument("--f", dest="f", help="f(t,x) expression")
    g.add_argument("--F", dest="F", help="closed-form antiderivative F(t,x) (optional)")
    g.add_argument("--config", help="key=value config file")
    g.add_argument("--a", type=float)
    g.add_argument("--b", type=float)
    g.add_argument("--gamma", type=float)
    g.add_argument("--xrange", type=float)
    g.add_argument("--tsamples", type=int)
    g.add_argument("--xsamples", type=int)
    g.add_argument(
        "--derivative-mode",
        choices=("auto", "symbolic", "finite-difference"),
        default="auto",
    )


def _add_solver_flags(p):
    g = p.add_argument_group("solver")
    g.add_argument("--tol", type=float, default=NewtonConfig.residual_tol)
    g.add_argument("--max-iter", type=int, default=NewtonConfig.max_iter)
    g.add_argument("--method", choices=("newton", "gradient"), default="newton")
    g.add_argument(
        "--override-assumptions",
        action="store_true",
        help="solve even if H1/H2 fail (research use; results carry no guarantee)",
    )


def _add_output_flags(p, default_format="csv"):
    p.add_argument("--format", choices=("csv", "json"), default=default_format)
    p.add_argument("--output", help="output path (default: standard output)")


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nonspurious", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="solve the discrete problem at one n")
    _add_nonlinearity_flags(p)
    _add_solver_flags(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--include-solution", action="store_true", help="inline solution in JSON")
    _add_output_flags(p)

    p = sub.add_parser("study", help="convergence study over a schedule of n")
    _add_nonlinearity_flags(p)
    _add_solver_flags(p)
    p.add_argument("--schedule", type=_int_list, default=analysis.DEFAULT_SCHEDULE)
    p.add_argument("--oracle", choices=("closed-form", "fine-grid"))
    p.add_argument("--oracle-name", default="affine")
    p.add_argument("--n-ref", type=int)
    _add_output_flags(p)

    p = sub.add_parser("verify", help="check the a-priori bounds at one n")
    _add_nonlinearity_flags(p)
    _add_solver_flags(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    _add_output_flags(p, "json")

    p = sub.add_parser("spurious", help="reproduce the linear spurious-solution examples")
    p.add_argument("--ns", type=_int_list, default=(4, 10, 50))
    _add_output_flags(p, "json")

    p = sub.add_parser("check", help="sample-check H1, H2, H2a and relaxed convexity")
    _add_nonlinearity_flags(p)
    p.add_argument("--convexity-a", type=float, help="also check relaxed convexity with this a")
    _add_output_flags(p, "json")
    return parser


# ---------------------------------------------------------------------------


def _nonlinearity(args):
    sources = [args.name is not None, args.f is not None or args.config is not None]
    if sum(sources) != 1:
        raise BadFlags("give exactly one nonlinearity source: --name, or --f/--config")
    settings = {}
    if args.config:
        try:
            settings = nlmod.load_config(args.config)
        except (OSError, ValueError) as err:
            raise BadFlags(f"config: {err}")
    for key in ("f", "F", "a", "b", "gamma", "xrange", "tsamples", "xsamples"):
        value = getattr(args, key)
        if value is not None:
            settings[key] = value

    sampling = nlmod.SamplingConfig(
        settings.get("xrange", 100.0), settings.get("tsamples", 201), settings.get("xsamples", 401)
    )
    h2a_keys = [k for k in ("a", "b", "gamma") if k in settings]
    if h2a_keys and len(h2a_keys) != 3:
        raise BadFlags("H2a needs all of --a, --b, --gamma")
    h2a = tuple(settings[k] for k in ("a", "b", "gamma")) if h2a_keys else None

    try:
        if args.name is not None:
            if args.name not in nlmod.CATALOGUE:
                raise BadFlags(f"unknown catalogue entry {args.name!r}")
            entry = nlmod.CATALOGUE[args.name]
            return nlmod.build(
                entry.f,
                entry.F,
                h2a or entry.h2a,
                derivative_mode=entry.derivative_mode
                if args.derivative_mode == "auto"
                else args.derivative_mode,
                label=args.name,
                sampling=sampling,
            )
        if "f" not in settings:
            raise BadFlags("config file gives no f")
        return nlmod.build(
            settings["f"],
            settings.get("F"),
            h2a,
            derivative_mode=args.derivative_mode,
            sampling=sampling,
        )
    except ValueError as err:
        raise BadFlags(str(err))


def _config(args):
    try:
        return NewtonConfig(residual_tol=args.tol, max_iter=args.max_iter, method=args.method)
    except ValueError as err:
        raise BadFlags(str(err))


def _warn_override(args, err):
    if getattr(args, "override_assumptions", False):
        err.write(
            "WARNING: --override-assumptions set; H1/H2 are not enforced and "
            "uniqueness/bounds are not guaranteed\n"
        )


def _emit(args, text, out):
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        out.write(text)


def _csv_table(rows, columns):
    buf = io.StringIO()
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(_cell(row.get(c)) for c in columns) + "\n")
    return buf.getvalue()


def _cell(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.17g}"
    return "" if v is None else str(v)


def _json(obj):
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


# ---------------------------------------------------------------------------


def cmd_solve(args, out, err):
    nl = _nonlinearity(args)
    if args.n < 2:
        raise BadFlags("--n must be >= 2")
    rep = newton_solve(DiscreteBVP(args.n, nl), _config(args), override_assumptions=args.override_assumptions)
    if args.format == "json":
        _emit(args, _json(rep.to_dict(include_solution=args.include_solution)), out)
    else:
        _emit(args, rep.solution.to_csv(), out)
    err.write(
        f"n={rep.n} status={rep.status} iterations={rep.iterations} "
        f"residual={rep.final_residual:.3e}\n"
    )
    return EXIT_OK


def cmd_study(args, out, err):
    nl = _nonlinearity(args)
    oracle_kind = args.oracle
    if oracle_kind is None:
        oracle_kind = "closed-form" if nl.label == args.oracle_name else "fine-grid"
    if oracle_kind == "closed-form":
        if args.oracle_name != "affine" or nl.label != "affine":
            raise BadFlags("the only closed-form study oracle is 'affine' (use --name affine)")
    try:
        schedule = analysis.StudySchedule(
            args.schedule, oracle_kind, args.oracle_name, args.n_ref, _config(args)
        )
    except ValueError as e:
        raise BadFlags(str(e))
    try:
        rep = analysis.run_convergence_study(nl, schedule, override_assumptions=args.override_assumptions)
    except analysis.StudyError as e:
        err.write(f"{e}\n")
        raise e.cause
    _emit(args, rep.to_json() + "\n" if args.format == "json" else rep.to_csv(), out)
    return EXIT_OK


def cmd_verify(args, out, err):
    nl = _nonlinearity(args)
    if args.n < 2:
        raise BadFlags("--n must be >= 2")
    p = DiscreteBVP(args.n, nl)
    rep = newton_solve(p, _config(args), override_assumptions=args.override_assumptions)
    checks = analysis.verify_theorem3_bounds(rep, nl.c)
    result = {
        "report": rep.to_dict(),
        "c": nl.c,
        "a_priori_bounds": {k: {"lhs": v.lhs, "rhs": v.rhs, "holds": v.holds} for k, v in checks.items()},
    }
    ok = all(v.holds for v in checks.values())
    if nl.h2a is not None:
        chain = analysis.verify_h2a_chain(p, rep, *nl.h2a, rng=np.random.default_rng(args.seed))
        result["h2a_chain"] = chain.to_dict()
        ok &= chain.rel_add_coer_random and chain.rel_add_coer_solution and chain.N_bound != "false"
    result["all_hold"] = bool(ok)
    if args.format == "json":
        text = _json(result)
    else:
        rows = [{"check": k, **v} for k, v in result["a_priori_bounds"].items()]
        text = _csv_table(rows, ["check", "lhs", "rhs", "holds"])
    _emit(args, text, out)
    if not ok:
        err.write("a bound check failed\n")
        return EXIT_ASSUMPTION
    return EXIT_OK


def cmd_spurious(args, out, err):
    if any(n < 2 for n in args.ns):
        raise BadFlags("--ns entries must be >= 2")
    demo = analysis.spurious_demo(args.ns)
    if args.format == "json":
        text = _json(demo.to_dict())
    else:
        text = _csv_table(
            demo.cases, ["case", "n", "lambda", "alpha", "beta", "outcome", "expected", "matches"]
        )
    _emit(args, text, out)
    return EXIT_OK if demo.all_match else EXIT_ASSUMPTION


_CITES = {"H1": H1_TEXT, "H2": H2_TEXT, "H2a": H2A_TEXT, "RelaxedConvexity": "x ↦ F(t,x) + (a/2π)x² convex"}


def cmd_check(args, out, err):
    nl = _nonlinearity(args)
    verdicts = [nl.h1, nl.h2]
    if nl.h2a is not None:
        verdicts.append(nlmod.check_H2a(nl))
    if args.convexity_a is not None:
        if not 0 < args.convexity_a < 1:
            raise BadFlags("--convexity-a must lie in (0, 1)")
        verdicts.append(nlmod.check_relaxed_convexity(nl, args.convexity_a))
    rows = [
        {
            "hypothesis": v.hypothesis,
            "pass": v.passed,
            "witness": None if v.witness is None else " ".join(f"{w:.17g}" for w in v.witness),
            "samples": v.samples,
        }
        for v in verdicts
    ]
    if args.format == "json":
        text = _json({"nonlinearity": nl.describe(), "verdicts": rows})
    else:
        text = _csv_table(rows, ["hypothesis", "pass", "witness", "samples"])
    _emit(args, text, out)
    failed = [v for v in verdicts if not v.passed]
    for v in failed:
        err.write(f"{v.hypothesis} fails: {_CITES[v.hypothesis]} violated at {v.witness}\n")
    return EXIT_ASSUMPTION if failed else EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "study": cmd_study,
    "verify": cmd_verify,
    "spurious": cmd_spurious,
    "check": cmd_check,
}


def run(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = make_parser().parse_args(argv)
        _warn_override(args, err)
        return COMMANDS[args.command](args, out, err)
    except BadFlags as e:
        err.write(f"error: {e}\n")
        return EXIT_BAD_FLAGS
    except ex.ParseError as e:
        err.write(f"{e}\n")
        return EXIT_PARSE
    except (ex.DomainError, ex.NonDifferentiableError, nlmod.BuildError) as e:
        err.write(f"{e}\n")
        return EXIT_PARSE
    except AssumptionError as e:
        cite = _CITES.get(e.verdict.hypothesis, "")
        err.write(f"{e} [{e.verdict.hypothesis}: {cite}]\n")
        return EXIT_ASSUMPTION
    except SingularSystemError as e:
        err.write(f"{e}\n")
        return EXIT_SINGULAR
    except ConvergenceError as e:
        err.write(f"{e}\n")
        return EXIT_NO_CONVERGENCE
    except SystemExit as e:  # --help
        return int(e.code or 0)


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
