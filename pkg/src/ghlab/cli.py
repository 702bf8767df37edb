"""Command line front end: ``ghlab <command> ...``.

Exit codes: 0 success, 1 failed check, 2 usage or data error, 3 numerical failure.
Reports go to stdout as JSON; files are written only where ``-o`` is given.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import spectrum as sp
from . import surface_rep as sr
from . import thermo as th
from . import verify as vf
from .errors import (
    DegenerateConfiguration,
    EnumerationBudgetExceeded,
    GramSingular,
    InsufficientData,
    InvalidElement,
    NewtonDiverged,
    NonConvergence,
    NotHyperbolic,
    NotOnPressureZero,
    NotTangent,
    RelatorSearchFailed,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

USAGE_ERRORS = (InsufficientData, DegenerateConfiguration, NotOnPressureZero, NotTangent,
                InvalidElement, ValueError, KeyError, OSError, json.JSONDecodeError)
NUMERIC_ERRORS = (NewtonDiverged, NonConvergence, NotHyperbolic, GramSingular,
                  RelatorSearchFailed, EnumerationBudgetExceeded)


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2))


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _window(text: str) -> tuple[float, float]:
    lo, hi = text.split(":")
    return float(lo), float(hi)


def _threads(args) -> int:
    return args.threads if args.threads else (os.cpu_count() or 1)


def _load_pair(args) -> sr.GHPair:
    left = sr.load_representation(args.left) if args.left else sr.octagon_fuchsian()
    right = sr.load_representation(args.right) if args.right else left
    return sr.GHPair(left, right)


# -- commands --------------------------------------------------------------------

def cmd_rep(args) -> int:
    if args.action == "build":
        if args.type != "octagon":
            raise ValueError(f"unknown representation type {args.type!r}")
        rep = sr.octagon_fuchsian()
    else:
        if not args.input:
            raise ValueError("rep deform needs --input")
        base = sr.load_representation(args.input)
        direction = sr.random_direction(base, np.random.default_rng(args.seed))
        rep = sr.deform(base, direction, args.t)
    if args.output:
        sr.save_representation(rep, args.output)
    _emit({"relator_residual": rep.residual, "output": args.output})
    return EXIT_OK


def cmd_spectrum(args) -> int:
    pair = _load_pair(args)
    spec = sp.enumerate_classes(pair, args.max_word_len, threads=_threads(args))
    text = spec.to_csv()
    if args.output:
        Path(args.output).write_text(text)
        _emit({"classes": len(spec), "max_word_len": args.max_word_len, "output": args.output})
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_entropy(args) -> int:
    spec = sp.LengthSpectrum.from_csv(Path(args.spectrum).read_text())
    window = _window(args.window) if args.window else sp.horizon_window(spec)
    est = sp.entropy_estimate(spec, window, correction=args.correction)
    _emit({"value": est.value, "stderr": est.slope_stderr, "window": list(est.window),
           "samples": est.sample_count, "correction": args.correction})
    return EXIT_OK


def cmd_bending(args) -> int:
    rep = sr.load_representation(args.input) if args.input else sr.octagon_fuchsian()
    direction = sr.random_direction(rep, np.random.default_rng(args.seed))
    r = sp.bending_derivative_test(rep, direction, args.eps, args.max_word_len, path_kind=args.path)
    _emit({"max_rel_derivative": r.max_rel_derivative,
           "max_rel_derivative_half_step": r.max_rel_derivative_half_step,
           "classes": r.n_classes})
    return EXIT_OK


def cmd_proportionality(args) -> int:
    pair = _load_pair(args) if (args.left or args.right) else sr.bent_pair()
    path = vf.bent_path(pair, np.random.default_rng(args.seed))
    r = sp.proportionality_test(path, args.eps, args.max_word_len)
    _emit({"k_fit": r.k_fit, "rel_residual": r.rel_residual,
           "richardson_gap": r.richardson_gap, "classes": r.n_classes})
    return EXIT_OK


def cmd_thermo(args) -> int:
    shift, file_potential = th.load_graph(args.graph)
    out: dict = {}
    if args.potential:
        pot = th.EdgeFunction.from_array(shift, _floats(args.potential))
    elif file_potential is not None:
        pot = file_potential
    else:
        pot = th.EdgeFunction.constant(shift, 0.0)
    out["pressure"] = th.pressure(shift, pot)
    if args.roof or args.solve_entropy:
        roof = (th.EdgeFunction.from_array(shift, _floats(args.roof)) if args.roof
                else th.EdgeFunction.constant(shift, 1.0))
        out["entropy"] = th.entropy_root(shift, roof)
    if args.tangent:
        g = th.EdgeFunction.from_array(shift, _floats(args.tangent))
        out["pressure_form"] = th.pressure_form(shift, pot, g)
    _emit(out)
    return EXIT_OK


def cmd_verify(args) -> int:
    rows = vf.run_suite(args.suite, seed=args.seed, threads=_threads(args))
    print(vf.format_table(rows))
    failed = [r for r in rows if not r.passed]
    print(f"{len(rows) - len(failed)}/{len(rows)} checks passed")
    return EXIT_FAIL if failed else EXIT_OK


# -- parser -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ghlab", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=None)

    r = sub.add_parser("rep", parents=[common], help="build or deform a representation")
    r.add_argument("action", choices=["build", "deform"])
    r.add_argument("--type", default="octagon")
    r.add_argument("--input")
    r.add_argument("--t", type=float, default=0.0)
    r.add_argument("-o", "--output")
    r.set_defaults(func=cmd_rep)

    s = sub.add_parser("spectrum", parents=[common], help="enumerate the length spectrum")
    s.add_argument("--left")
    s.add_argument("--right")
    s.add_argument("--max-word-len", type=int, default=6)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_spectrum)

    e = sub.add_parser("entropy", parents=[common], help="estimate entropy from a spectrum CSV")
    e.add_argument("--spectrum", required=True)
    e.add_argument("--window", help="T_lo:T_hi (default: horizon window)")
    e.add_argument("--correction", choices=["none", "prime-orbit"], default="none")
    e.set_defaults(func=cmd_entropy)

    b = sub.add_parser("bending-test", parents=[common], help="derivative of lengths along bending")
    b.add_argument("--input")
    b.add_argument("--eps", type=float, default=1e-3)
    b.add_argument("--max-word-len", type=int, default=6)
    b.add_argument("--path", choices=["bending", "same"], default="bending")
    b.set_defaults(func=cmd_bending)

    q = sub.add_parser("proportionality-test", parents=[common],
                       help="fit d ell/dt = k ell along a random path")
    q.add_argument("--left")
    q.add_argument("--right")
    q.add_argument("--eps", type=float, default=1e-3)
    q.add_argument("--max-word-len", type=int, default=6)
    q.set_defaults(func=cmd_proportionality)

    t = sub.add_parser("thermo", parents=[common], help="pressure, entropy and pressure form")
    t.add_argument("--graph", required=True)
    t.add_argument("--potential", help="comma-separated edge values in edge-id order")
    t.add_argument("--roof", help="comma-separated positive roof values")
    t.add_argument("--solve-entropy", action="store_true")
    t.add_argument("--tangent", help="direction for the pressure form at the potential")
    t.set_defaults(func=cmd_thermo)

    v = sub.add_parser("verify", parents=[common], help="run the identity suite")
    v.add_argument("--suite", choices=sorted(vf.SUITES), default="identities")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NUMERIC_ERRORS as exc:
        print(f"ghlab: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except USAGE_ERRORS as exc:
        print(f"ghlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
