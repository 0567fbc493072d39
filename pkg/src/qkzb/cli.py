"""Command-line front end.

    qkzb eval <function> [--flags]
    qkzb verify <check> [--flags]
    qkzb grid <function> --lambda-from A --lambda-to B --n N [--flags]

Every command prints a JSON run report (sorted keys).  Exit codes: 0 pass,
1 verification failure, 2 usage error, 3 numerical error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import re
import sys
import time

import numpy as np

from .errors import NumericalError, QKZBError
from .numerics import DEFAULT_TOL, Tolerance

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2, 3

_NUM = r"(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?"
_IMAG = re.compile(rf"^(?P<im>[+-]?(?:{_NUM})?)i$")
_FULL = re.compile(rf"^(?P<re>[+-]?{_NUM})(?:(?P<im>[+-](?:{_NUM})?)i)?$")


def _imag_part(text: str) -> float:
    if text in ("", "+"):
        return 1.0
    if text == "-":
        return -1.0
    return float(text)


def parse_complex(text: str) -> complex:
    """Parse a+bi, a-bi, bi or a (decimal, no spaces)."""
    m = _IMAG.match(text)
    if m:
        return complex(0.0, _imag_part(m.group("im")))
    m = _FULL.match(text)
    if m is None:
        raise argparse.ArgumentTypeError(f"not a complex literal: {text!r}")
    im = m.group("im")
    return complex(float(m.group("re")), 0.0 if im is None else _imag_part(im))


def parse_point(text: str):
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected x1,x2,x3, got {text!r}")
    return tuple(parse_complex(p) for p in parts)


def _jsonable(value):
    # non-finite floats become null so the report stays strict JSON
    if isinstance(value, (complex, np.complexfloating)):
        value = complex(value)
        return {"re": _jsonable(value.real), "im": _jsonable(value.imag)}
    if isinstance(value, (np.floating, float)):
        return float(value) if math.isfinite(value) else None
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    return value


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------- eval functions

def _g(args):
    from .spectral import HeatSolutionSpec
    return HeatSolutionSpec(args.mu_g, args.kappa)


def _eval_theta1(a, x, tol):
    from .theta import theta1
    return theta1(a.t if x is None else x, a.tau)


def _eval_theta_level(a, x, tol):
    from .theta import ThetaIndex, theta_level
    if a.j is None or a.level is None:
        raise UsageError("theta-level needs --j and --level")
    return theta_level(ThetaIndex(a.j, a.level), a.lam if x is None else x, a.tau)


def _eval_rho(a, x, tol):
    from .theta import rho
    return rho(a.t if x is None else x, a.tau)


def _eval_rho_prime(a, x, tol):
    from .theta import rho_dt
    return rho_dt(a.t if x is None else x, a.tau)


def _eval_gamma(a, x, tol):
    from .gamma import ellgamma
    return ellgamma(a.t if x is None else x, a.tau, a.p)


def _eval_omega(a, x, tol):
    from .gamma import omega
    return omega(a.a, a.t if x is None else x, a.tau, a.p, check=True)


def _eval_q_cubic(a, x, tol):
    from .gamma import q_cubic
    return q_cubic(a.t if x is None else x, a.tau, a.p)


def _eval_kernel_u(a, x, tol):
    from .interacting import KernelArgs, kernel_u
    return kernel_u(KernelArgs(a.lam if x is None else x, a.mu, a.tau, a.p, a.eta), tol)


def _eval_hypergeom(a, x, tol):
    from .spectral import hypergeom_m1
    return hypergeom_m1(a.kappa.real, _g(a), a.lam if x is None else x, a.tau, tol)


EVAL = {
    "theta1": _eval_theta1,
    "theta-level": _eval_theta_level,
    "rho": _eval_rho,
    "rho-prime": _eval_rho_prime,
    "gamma": _eval_gamma,
    "omega": _eval_omega,
    "q-cubic": _eval_q_cubic,
    "kernel-u": _eval_kernel_u,
    "hypergeom-m1": _eval_hypergeom,
}


# --------------------------------------------------------------------------- verifications
# each returns (residual, tolerance, extra fields)

def _v_gamma_heat(a, tol):
    from .gamma import verify_gamma_identity
    return verify_gamma_identity("heat", a.t, a.tau, a.p), 1e-9, {}


def _v_gamma_modular(a, tol):
    from .gamma import verify_gamma_identity
    return verify_gamma_identity("modular", a.t, a.tau, a.p), 1e-8, {}


def _fourier(kind):
    def run(a, tol):
        from .flat import BasePoint, GaussianElem, fourier_identity_residual
        x = BasePoint(*a.x)
        rep = fourier_identity_residual(kind, x, GaussianElem.from_fiber(a.t, x))
        return max(rep.dev, rep.quad_dev), 1e-8, {"ratio": rep.ratio, "quad_dev": rep.quad_dev}
    return run


def parse_relation(text: str):
    from .flat import ElemGen, braid_relation, torsion_relation
    m = re.fullmatch(r"commute:(\d)(\d),(\d)(\d)", text)
    if m:
        i, j, k, l = (int(c) for c in m.groups())
        if i == l or j == k:
            raise UsageError(f"e{i}{j} and e{k}{l} are not a commuting pair (need i != l, j != k)")
        a, b = ElemGen(i, j), ElemGen(k, l)
        return (a, b), (b, a), 1e-8
    m = re.fullmatch(r"braid:?(\d),?(\d),?(\d)", text)
    if m:
        i, j, k = (int(c) for c in m.groups())
        if len({i, j, k}) != 3:
            raise UsageError("braid indices must be distinct")
        return (*braid_relation(i, j, k), 1e-8)
    if text == "torsion4":
        return (*torsion_relation(), 1e-6)
    raise UsageError(f"unknown relation {text!r}; use commute:ij,kl, braid:i,j,k or torsion4")


def _v_sl3(a, tol):
    from .flat import BasePoint, GaussianElem, verify_relation
    if a.relation is None:
        raise UsageError("sl3 needs --relation")
    try:
        lhs, rhs, bound = parse_relation(a.relation)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    x = BasePoint(*a.x)
    probes = [GaussianElem.from_fiber(t, x) for t in (0.5j, 1 + 1j)]
    rep = verify_relation(lhs, rhs, x, probes)
    return rep.max_dev, bound, {"ratio": rep.ratio}


def _v_theta_block(a, tol):
    from .flat import theta_block_residual
    if a.j is None or a.level is None:
        raise UsageError("theta-block needs --j and --level")
    return theta_block_residual(a.j, a.level, a.lam, a.tau, a.eta, tol), 1e-8, {}


def _v_projective_free(a, tol):
    from .flat import projective_residual_free
    return projective_residual_free(a.lam, a.mu, a.tau, a.p, a.eta, a.true_solution), 1e-10, {}


def _v_projective_one(a, tol):
    from .interacting import projective_sides_one
    lhs, rhs = projective_sides_one(a.lam, a.mu, a.tau, a.p, a.eta, tol)
    return float(abs(lhs - rhs) / (abs(lhs) + abs(rhs))), 1e-6, {"lhs": lhs, "rhs": rhs}


def _v_hermite(a, tol):
    from .spectral import hermite_eigen
    rep = hermite_eigen(a.mu, a.tau, np.linspace(0.15, 0.85, 12))
    return rep.constancy_dev, 1e-6, {"E": rep.E, "t0": rep.t0}


def _v_kzb(a, tol):
    from .spectral import hypergeom_m1, kzb_residual
    g = _g(a)
    if a.m == 0:
        v, bound = g, 1e-7
    elif a.m == 1:
        fine = Tolerance(1e-12, 1e-12, tol.max_evals)

        def v(lam, tau):
            return hypergeom_m1(a.kappa.real, g, lam, tau, fine)
        bound = 1e-4
    else:
        raise UsageError("--m must be 0 or 1")
    return kzb_residual(v, a.lam, a.tau, a.kappa, a.m), bound, {}


def _v_modular_map(a, tol):
    from .spectral import kzb_residual, modular_map_classical
    g = _g(a)
    tilde = modular_map_classical(g, a.kappa)
    return kzb_residual(tilde, a.lam, a.tau, a.kappa, 0), 1e-6, {"value": tilde(a.lam, a.tau)}


def _v_semiclassical(a, tol):
    from .flat import translation_free
    from .interacting import translation_one
    from .spectral import hypergeom_m1, semiclassical_order
    etas = [-0.02j * 2.0**-k for k in range(5)]
    g = _g(a)
    fine = Tolerance(1e-13, 1e-13, tol.max_evals)
    if a.operand == "heat":
        v, expected = g, 2.0
    elif a.operand == "exp":
        def v(lam, tau):
            return np.exp(np.asarray(lam, dtype=complex))
        expected = 1.0
    else:
        def v(lam, tau):
            return hypergeom_m1(a.kappa.real, g, lam, tau, fine)
        expected = 2.0
    family = translation_free if a.family == "free" else translation_one
    rep = semiclassical_order(family, v, a.lam, a.tau, a.kappa, etas, tol=fine,
                              coeff_check=a.family == "free")
    bound = 0.1 if a.family == "free" else 0.2
    return abs(rep.slope - expected), bound, {"slope": rep.slope, "coeff_check": rep.coeff_check,
                                               "expected_slope": expected}


VERIFY = {
    "gamma-heat": _v_gamma_heat,
    "gamma-modular": _v_gamma_modular,
    "fourier-qheat": _fourier("qheat"),
    "fourier-modular": _fourier("modular"),
    "sl3": _v_sl3,
    "theta-block": _v_theta_block,
    "projective-free": _v_projective_free,
    "projective-one": _v_projective_one,
    "hermite": _v_hermite,
    "kzb-residual": _v_kzb,
    "modular-map": _v_modular_map,
    "semiclassical": _v_semiclassical,
}


# --------------------------------------------------------------------------- argument parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common(p):
    c = parse_complex
    p.add_argument("--tol", type=float, default=None, help="absolute and relative tolerance")
    p.add_argument("--out", default=None, help="also write the report (or CSV grid) to this file")
    p.add_argument("--t", type=c, default=0.2 + 0.1j)
    p.add_argument("--tau", type=c, default=1j)
    p.add_argument("--p", type=c, default=1.1j)
    p.add_argument("--a", type=c, default=0.1)
    p.add_argument("--lambda", dest="lam", type=c, default=0.3)
    p.add_argument("--mu", type=c, default=0.3)
    p.add_argument("--eta", type=c, default=-0.07j)
    p.add_argument("--kappa", type=c, default=4.0)
    p.add_argument("--mu-g", dest="mu_g", type=c, default=0.7)
    p.add_argument("--j", type=int, default=None)
    p.add_argument("--level", type=int, default=None)
    p.add_argument("--m", type=int, default=0)
    p.add_argument("--x", type=parse_point, default=(1.0, 1.7, 1.2j))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qkzb", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    ev = sub.add_parser("eval", help="evaluate a function at a point")
    ev.add_argument("function", choices=sorted(EVAL))
    _common(ev)
    ve = sub.add_parser("verify", help="check an identity and report pass/fail")
    ve.add_argument("check", choices=sorted(VERIFY))
    ve.add_argument("--relation", default=None)
    ve.add_argument("--true-solution", action="store_true")
    ve.add_argument("--family", choices=("free", "one"), default="free")
    ve.add_argument("--operand", choices=("heat", "exp", "hypergeom"), default="exp")
    _common(ve)
    gr = sub.add_parser("grid", help="evaluate a function along a segment in its first argument")
    gr.add_argument("function", choices=sorted(EVAL))
    gr.add_argument("--lambda-from", dest="lam_from", type=parse_complex, required=True)
    gr.add_argument("--lambda-to", dest="lam_to", type=parse_complex, required=True)
    gr.add_argument("--n", type=int, required=True)
    gr.add_argument("--csv", action="store_true", help="print the CSV grid instead of the JSON report")
    _common(gr)
    return parser


def _tolerance(args) -> Tolerance:
    tol = DEFAULT_TOL if args.tol is None else Tolerance(args.tol, args.tol)
    env = os.environ.get("QKZB_MAX_EVALS")
    if env is not None:
        try:
            tol = tol.replace(max_evals=int(env))
        except ValueError as exc:
            raise UsageError(f"QKZB_MAX_EVALS must be an integer >= 16, got {env!r}") from exc
    return tol


def _inputs(args) -> dict:
    skip = {"command", "out", "csv"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip and v is not None}


def _run(args, tol):
    report = {"command": f"{args.command} {getattr(args, 'function', None) or args.check}",
              "inputs": _inputs(args), "tolerance": tol.abs_tol}
    if args.command == "eval":
        report["value"] = complex(EVAL[args.function](args, None, tol))
        report["pass"] = True
        return report, None, EXIT_PASS
    if args.command == "verify":
        residual, bound, extra = VERIFY[args.check](args, tol)
        report.update(extra)
        report["residual"] = float(residual)
        report["tolerance"] = bound
        ok = bool(residual <= bound)
        report["pass"] = ok
        return report, None, EXIT_PASS if ok else EXIT_FAIL
    if args.n < 1:
        raise UsageError("--n must be positive")
    xs = np.linspace(0.0, 1.0, args.n) if args.n > 1 else np.zeros(1)
    lams = args.lam_from + (args.lam_to - args.lam_from) * xs
    values = [complex(EVAL[args.function](args, complex(x), tol)) for x in lams]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["re_lambda", "im_lambda", "re_value", "im_value"])
    for x, v in zip(lams, values):
        writer.writerow([repr(float(x.real)), repr(float(x.imag)), repr(v.real), repr(v.imag)])
    report["n"] = args.n
    report["value"] = values
    report["pass"] = True
    return report, buf.getvalue(), EXIT_PASS


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    start = time.perf_counter()
    try:
        args = build_parser().parse_args(argv)
        tol = _tolerance(args)
        report, grid_csv, code = _run(args, tol)
    except UsageError as exc:
        print(f"qkzb: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, ArithmeticError) as exc:
        report = {"command": " ".join(argv[:2]), "inputs": _inputs(args), "pass": False,
                  "error": type(exc).__name__, "message": str(exc)}
        grid_csv, code = None, EXIT_NUMERICAL
    except (QKZBError, ValueError) as exc:
        # invalid values that parsed syntactically (e.g. tau in the lower half plane)
        print(f"qkzb: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report["wall_time_ms"] = int(round((time.perf_counter() - start) * 1000))
    text = json.dumps(_jsonable(report), sort_keys=True, allow_nan=False)
    if grid_csv is not None and getattr(args, "csv", False):
        sys.stdout.write(grid_csv)
    else:
        print(text)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(grid_csv if grid_csv is not None else text + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
