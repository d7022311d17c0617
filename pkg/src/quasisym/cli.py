"""Command-line front end.

Exit status: 0 success, 2 usage or validation error, 3 numerical
non-convergence, 4 I/O error.  Any subcommand accepts ``--config FILE`` with
flat ``key = value`` lines whose keys mirror the long flags; flags given on
the command line win.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys

import numpy as np

from . import convexity as cx
from . import io as qio
from . import planar as pl
from . import radial as rd
from .errors import ConvergenceError, IntegrationError, NotFoundError
from .nonlin import DerivativeBundle, NonlinearitySpec, Weight, validate_growth

EXIT_OK, EXIT_USAGE, EXIT_NONCONV, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("quasisym")


class _Usage(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _Usage(f"{self.prog}: error: {message}")


def _spec_flags(p, N=True, with_psi=True):
    p.add_argument("--k", type=float, default=2.0, help="exponent in a(s) = 1 + |s|^k")
    p.add_argument("--p", type=float, default=5.0, help="source exponent")
    if N:
        p.add_argument("--N", type=int, default=3, help="space dimension")
    if with_psi:
        p.add_argument("--psi", default="constant:1",
                       help="weight: constant:C, radial-power:ALPHA[:C], even-x1:PROFILE[:BETA[:C]]")
        p.add_argument("--fsign", choices=["positive-part", "odd-power"], default="positive-part")
        p.add_argument("--constant-a", type=float, default=None,
                       help="use a constant diffusion a = C instead of 1 + |s|^k")
        p.add_argument("--s-max", type=float, default=20.0, help="g tabulation range")
        p.add_argument("--ode-tol", type=float, default=1e-12)


def _out(p, required=False, what="report"):
    p.add_argument("--out", required=required, help=f"{what} output path")


def build_parser():
    parser = _Parser(prog="quasisym", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    def add(name, help_):
        p = sub.add_parser(name, help=help_, description=help_)
        p.add_argument("--config", help="key = value file; flags override it")
        return p

    p = add("certify", "convexity certificates for h and h'")
    _spec_flags(p, N=False, with_psi=False)
    p.add_argument("--mode", choices=["h", cx.SHARP, cx.SUFFICIENT], default=cx.SHARP)
    _out(p)

    p = add("find-pk", "threshold p_k for the h' certificate")
    p.add_argument("--k", type=float, default=2.0)
    p.add_argument("--mode", choices=[cx.SHARP, cx.SUFFICIENT], default=cx.SHARP)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--ceiling", type=float, default=None)
    _out(p)

    p = add("scan", "tabulate h'' or h''' along s")
    _spec_flags(p)
    p.add_argument("--order", type=int, choices=[2, 3], default=2)
    p.add_argument("--smin", type=float, default=0.0)
    p.add_argument("--smax", type=float, default=2.0)
    p.add_argument("--samples", type=int, default=1000)
    _out(p, True, "CSV (s,value)")

    p = add("tabulate-g", "tabulate the change of variable g")
    _spec_flags(p)
    _out(p, True, "CSV (s,g,gprime)")

    p = add("solve-radial", "radial solution by shooting")
    _spec_flags(p)
    p.add_argument("--domain", choices=[rd.BALL, rd.ANNULUS], default=rd.BALL)
    p.add_argument("--R", type=float, default=1.0, help="outer radius")
    p.add_argument("--R0", type=float, default=0.0, help="inner radius (annulus)")
    p.add_argument("--nodes", type=int, default=0, help="interior zeros of the profile")
    p.add_argument("--bc-tol", type=float, default=1e-9)
    p.add_argument("--max-bisections", type=int, default=200)
    p.add_argument("--grid-points", type=int, default=16000)
    _out(p, True, "CSV (r,v,u,dv)")

    for name, help_ in (("morse", "Morse index of a radial solution file"),
                        ("nodal-check", "nodal-domain bound for a radial solution file")):
        p = add(name, help_)
        p.add_argument("--solution", required=True, help="CSV written by solve-radial")
        p.add_argument("--l-max", type=int, default=None)
        p.add_argument("--modes-grid", type=int, default=None)
        p.add_argument("--eig-margin", type=float, default=None)
        _out(p)

    p = add("solve-planar", "x1-symmetric rectangle solution by Newton")
    _spec_flags(p, N=False)
    p.add_argument("--L", type=float, default=1.0)
    p.add_argument("--H", type=float, default=1.0)
    p.add_argument("--n1", type=int, default=128)
    p.add_argument("--n2", type=int, default=64)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=60)
    _out(p, True, "CSV (x1,x2,v,u)")

    p = add("diagnose", "reflection and symmetry diagnostics of a solution file")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--field", help="CSV written by solve-planar")
    src.add_argument("--solution", help="CSV written by solve-radial")
    p.add_argument("--n-dirs", type=int, default=360)
    p.add_argument("--non-solution", action="store_true",
                   help="label the input as a manufactured (non-solution) field")
    _out(p)

    p = add("growth-check", "subcriticality bound ((k+1)N+2)/(N-2)")
    p.add_argument("--k", type=float, default=2.0)
    p.add_argument("--p", type=float, default=5.0)
    p.add_argument("--N", type=int, default=3)
    _out(p)
    return parser


# --------------------------------------------------------------------------
# config handling
# --------------------------------------------------------------------------

def _subparser(parser, name):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def _apply_config(parser, argv, args):
    sub = _subparser(parser, args.command)
    values = qio.parse_config(args.config)
    by_dest = {a.dest: a for a in sub._actions if a.option_strings}
    defaults = {}
    for key, raw in values.items():
        action = by_dest.get(key)
        if action is None or key in ("config", "help"):
            raise _Usage(f"config {args.config}: unknown key {key!r}")
        try:
            if isinstance(action, argparse._StoreTrueAction):
                value = raw.lower() in ("1", "true", "yes", "on")
            else:
                value = action.type(raw) if action.type else raw
        except (TypeError, ValueError) as exc:
            raise _Usage(f"config {args.config}: bad value for key {key!r}: {raw!r}") from exc
        if action.choices is not None and value not in action.choices:
            raise _Usage(f"config {args.config}: key {key!r} must be one of {list(action.choices)}")
        defaults[key] = value
    sub.set_defaults(**defaults)
    for action in sub._actions:
        if action.dest in defaults:
            action.required = False
    for group in sub._mutually_exclusive_groups:
        if any(a.dest in defaults for a in group._group_actions):
            group.required = False
    return parser.parse_args(argv)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def _spec(args, N=None):
    return NonlinearitySpec(k=args.k, p=args.p, psi=Weight.parse(args.psi), fsign=args.fsign,
                            N=N if N is not None else args.N, constant_a=args.constant_a)


def _emit(args, doc, summary):
    if getattr(args, "out", None) and doc is not None:
        qio.write_report(args.out, doc)
    for key, value in summary.items():
        if isinstance(value, float):
            value = qio.fmt(value)
        print(f"{key}: {value}")


def cmd_certify(args):
    if args.mode == "h":
        cert = cx.certify_h_convex(args.p, args.k)
    else:
        cert = cx.certify_hprime_convex(args.p, args.k, args.mode)
    doc = cert.as_dict()
    _emit(args, doc, {"p": cert.p, "k": cert.k, "mode": cert.mode,
                      "certified": str(cert.certified).lower(), "reason": cert.reason})


def cmd_find_pk(args):
    pk = cx.find_pk(args.k, args.mode, args.tol, args.ceiling)
    ceiling = args.ceiling if args.ceiling is not None else 4 * args.k + 8
    _emit(args, {"k": args.k, "mode": args.mode, "tol": args.tol, "ceiling": ceiling, "p_k": pk},
          {"k": args.k, "mode": args.mode, "p_k": pk})


def cmd_scan(args):
    bundle = DerivativeBundle(_spec(args), s_max=args.s_max, ode_tol=args.ode_tol)
    table = cx.scan_profile(bundle, args.order, (args.smin, args.smax), args.samples)
    qio.write_csv(args.out, ["s", "value"], [table.s, table.values])
    _emit(args, None, table.summary())


def cmd_tabulate_g(args):
    g = DerivativeBundle(_spec(args), s_max=args.s_max, ode_tol=args.ode_tol).g
    keep = g.nodes >= 0
    qio.write_csv(args.out, ["s", "g", "gprime"], [g.nodes[keep], g.values[keep], g.derivs[keep]])
    _emit(args, None, {"nodes": int(np.count_nonzero(keep)), "s_max": g.s_max,
                       "g(s_max)": float(g.values[-1])})


def cmd_solve_radial(args):
    spec = _spec(args)
    bundle = DerivativeBundle(spec, s_max=args.s_max, ode_tol=args.ode_tol)
    problem = rd.RadialProblemSpec(args.domain, args.R, args.R0, spec, args.nodes)
    controls = rd.Controls(ode_tol=args.ode_tol, bc_tol=args.bc_tol,
                           max_bisections=args.max_bisections, grid_points=args.grid_points)
    sol = rd.solve_radial(problem, bundle, controls)
    rd.write_solution(sol, args.out)
    rel = sol.relative_residuals()
    _emit(args, None, {"domain": sol.domain, "parameter": sol.parameter, "nodes": sol.node_count,
                       "residual_semi": sol.residual_semi, "residual_quasi": sol.residual_quasi,
                       "relative_semi": rel[0], "relative_quasi": rel[1]})


def _load_radial(path):
    sol = rd.read_solution(path)
    spec = sol.meta.get("spec")
    if spec is None:
        raise ValueError(f"{path}: solution file carries no nonlinearity parameters")
    bundle = DerivativeBundle(spec, s_max=sol.meta.get("s_max", 20.0))
    return sol, bundle


def _morse(args, sol, bundle):
    return rd.morse_index(sol, bundle, args.l_max, args.modes_grid, args.eig_margin)


def cmd_morse(args):
    sol, bundle = _load_radial(args.solution)
    rep = _morse(args, sol, bundle)
    _emit(args, rep.as_dict(), {"index": rep.index, "counts": rep.counts(), "l_max": rep.l_max,
                                "undercount": rep.undercount, "borderline": rep.borderline})


def cmd_nodal_check(args):
    sol, bundle = _load_radial(args.solution)
    rep = _morse(args, sol, bundle)
    nod = rd.nodal_report(sol, rep)
    growth = validate_growth(bundle.spec)
    doc = {"nodal": nod.as_dict(), "morse": rep.as_dict(), "growth": growth.as_dict()}
    _emit(args, doc, {"nod_u": nod.nod_u, "nod_v": nod.nod_v, "morse_index": nod.morse_index,
                      "bound": nod.bound, "satisfied": str(nod.satisfied).lower(),
                      "hypothesis_window": str(growth.nodal_window).lower()})


def cmd_solve_planar(args):
    spec = _spec(args, N=2)
    bundle = DerivativeBundle(spec, s_max=args.s_max, ode_tol=args.ode_tol)
    problem = pl.PlanarProblemSpec(args.L, args.H, args.n1, args.n2, spec)
    fld = pl.solve_planar(problem, bundle, pl.PlanarControls(tol=args.tol, max_iter=args.max_iter))
    pl.write_field(fld, args.out)
    _emit(args, None, {"residual": fld.residual, "iterations": fld.iterations,
                       "trivial": str(fld.trivial).lower(), "max_v": float(np.max(fld.v))})


def cmd_diagnose(args):
    if args.field:
        fld, spec = pl.read_field(args.field)
        sym = pl.symmetry_metrics(fld, n_dirs=args.n_dirs)
        doc = {"symmetry": sym.as_dict()}
        summary = {"even_deviation": sym.even_deviation}
        if spec is not None:
            bundle = DerivativeBundle(spec, s_max=fld.meta.get("s_max", 20.0))
            ref = pl.reflection_diagnostics(fld, bundle, solution=not args.non_solution)
            doc["reflection"] = ref.as_dict()
            summary.update({"label": doc["reflection"]["label"],
                            "slope_discrepancy": ref.slope_discrepancy,
                            "slope_max_positive": ref.slope_violation,
                            "two_parameter_max": ref.two_param_violation})
    else:
        sol = rd.read_solution(args.solution)
        sym = pl.symmetry_metrics(sol, n_dirs=args.n_dirs)
        doc = {"symmetry": sym.as_dict()}
        summary = {"even_deviation": sym.even_deviation}
    summary["fs_deviation"] = sym.fs_deviation
    _emit(args, doc, summary)


def cmd_growth_check(args):
    spec = NonlinearitySpec(k=args.k, p=args.p, N=args.N)
    rep = validate_growth(spec)
    bound = rep.bound
    _emit(args, rep.as_dict(), {"k": rep.k, "p": rep.p, "N": rep.N,
                                "bound": bound if math.isfinite(bound) else "inf",
                                "subcritical": str(rep.subcritical).lower(),
                                "nodal_window": str(rep.nodal_window).lower()})


COMMANDS = {
    "certify": cmd_certify, "find-pk": cmd_find_pk, "scan": cmd_scan,
    "tabulate-g": cmd_tabulate_g, "solve-radial": cmd_solve_radial, "morse": cmd_morse,
    "nodal-check": cmd_nodal_check, "solve-planar": cmd_solve_planar,
    "diagnose": cmd_diagnose, "growth-check": cmd_growth_check,
}


def _peek(argv):
    command = next((a for a in argv if not a.startswith("-")), None)
    config = None
    for i, a in enumerate(argv):
        if a == "--config" and i + 1 < len(argv):
            config = argv[i + 1]
        elif a.startswith("--config="):
            config = a.split("=", 1)[1]
    return command, config


def run(argv=None):
    """Parse ``argv``, dispatch, and return the exit status."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        command, config = _peek(argv)
        if command in COMMANDS and config:
            # the file may supply required flags, so install it before parsing
            args = _apply_config(parser, argv, argparse.Namespace(command=command, config=config))
        else:
            args = parser.parse_args(argv)
    except _Usage as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"quasisym: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"quasisym: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except (ConvergenceError, IntegrationError, NotFoundError) as exc:
        print(f"quasisym {args.command}: no convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONV
    except OSError as exc:
        print(f"quasisym {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"quasisym {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
