"""Command-line front end.

Every subcommand prints one JSON envelope (tool, version, command, input echo,
seed, elapsed time, result).  ``iterate`` and ``plot-data`` can also write CSV.

Exit codes: 0 success, 1 negative verdict, 2 input error, 3 internal failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import random
import sys
import time
from fractions import Fraction
from pathlib import Path

from . import __version__

EXIT_OK, EXIT_NEGATIVE, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2, 3


class InputError(ValueError):
    pass


# input helpers ---------------------------------------------------------------


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from exc


def _abg(args) -> dict:
    """Canonical parameters; omitted ones stay symbolic."""
    return {k: getattr(args, k) for k in ("alpha", "beta", "gamma") if getattr(args, k) is not None}


def _abg_numeric(args) -> tuple:
    vals = _abg(args)
    missing = [k for k in ("alpha", "beta", "gamma") if k not in vals]
    if missing:
        raise InputError(f"numeric runs need --{' --'.join(missing)}")
    return vals["alpha"], vals["beta"], vals["gamma"]


def _load_json_source(path: str) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise InputError("JSON input must be an object")
    return data


def _equation_input(args):
    """Exactly one of (f, h), (A, B, C), an equation string, or a JSON file."""
    from .expr import parse
    from .lagrangian import RawAdditiveEquation, parse_equation

    src = {}
    if args.json:
        src = _load_json_source(args.json)
    f = args.f if args.f is not None else src.get("f")
    h = args.h if args.h is not None else src.get("h")
    A = args.A if args.A is not None else src.get("A")
    B = args.B if args.B is not None else src.get("B")
    C = args.C if args.C is not None else src.get("C")
    eq = args.equation if args.equation is not None else src.get("equation")
    given = [f is not None or h is not None, any(v is not None for v in (A, B, C)), eq is not None]
    if sum(given) != 1:
        raise InputError("give exactly one equation source: --f/--h, --A/--B/--C, or --equation")
    if given[0]:
        if f is None or h is None:
            raise InputError("--f and --h must be given together")
        return (parse(f), parse(h))
    if given[1]:
        if None in (A, B, C):
            raise InputError("--A, --B and --C must be given together")
        return RawAdditiveEquation(parse(A), parse(B), parse(C))
    return parse_equation(eq)


def _family_values(args, symbolic_default: bool = True) -> dict:
    from .family import PARAMS

    src = _load_json_source(args.json) if getattr(args, "json", None) else {}
    out = {}
    for p in PARAMS:
        v = getattr(args, p)
        if v is None and p in src:
            v = _fraction(str(src[p]))
        if v is not None:
            out[p] = v
        elif not symbolic_default:
            out[p] = Fraction(0)
    return out


def _state(text: str) -> tuple:
    parts = [p for p in text.replace(";", ",").split(",") if p.strip()]
    if len(parts) != 4:
        raise InputError("initial state needs four values x1,x0,x-1,x-2")
    return tuple(_fraction(p.strip()) for p in parts)


# subcommands ---------------------------------------------------------------


def cmd_test(args, rng):
    from .lagrangian import variational_test

    report = variational_test(_equation_input(args))
    out = report.as_dict()
    if report.verdict == "variational":
        out["message"] = "equation is variational"
        return out, EXIT_OK
    out["message"] = f"{report.verdict}: {report.reason}"
    return out, EXIT_NEGATIVE


def cmd_el(args, rng):
    from .expr.closedform import parse_closed_form
    from .lagrangian import equation_key, euler_lagrange_expr, variational_test

    L = parse_closed_form(args.lagrangian)
    lam = _fraction(args.lam)
    E = euler_lagrange_expr(L, lam)
    out = {"lagrangian": str(L), "lambda": str(lam), "equation": str(E), "normalized": str(equation_key(E))}
    if args.check:
        rep = variational_test(E)
        out["round_trip"] = rep.verdict
        if rep.verdict != "variational":
            return out, EXIT_NEGATIVE
    return out, EXIT_OK


def cmd_family(args, rng):
    from .family import check_invariance, family_equation, invariant_I, invariant_J

    vals = _family_values(args)
    E = family_equation(vals)
    I = invariant_I(vals)
    J = invariant_J(vals, variant=args.variant)
    out = {"values": {k: str(v) for k, v in vals.items()}, "equation": str(E), "I": str(I), "J": str(J)}
    code = EXIT_OK
    if args.check:
        certs = {}
        for name, F in (("I", I), ("J", J)):
            c = check_invariance(F, E, samples=args.samples, seed=args.seed, force_sampling=args.sampled)
            certs[name] = c.as_dict()
            if not c.invariant:
                code = EXIT_NEGATIVE
        out["certificates"] = certs
    return out, code


def cmd_classify(args, rng):
    from .canonical import to_canonical

    vals = _family_values(args, symbolic_default=False)
    cc, model = to_canonical(vals)
    out = {"classification": cc.as_dict()}
    if model is not None:
        out["canonical_equation"] = str(model.equation)
    return out, EXIT_OK


def cmd_poisson(args, rng):
    from .canonical import canonical_lagrangian, printed_brackets
    from .poisson import PoissonStructure, compare_tables, poisson_from_lagrangian

    vals = _abg(args)
    P = poisson_from_lagrangian(canonical_lagrangian(args.case, **vals))
    diff = compare_tables(P, printed_brackets(args.case, corrected=not args.literal, **vals))
    agree = all(d.is_zero() for d in diff.values())
    out = {
        "case": args.case,
        "brackets": P.as_dict(),
        "matches_printed": agree,
        "differences": {f"{{x[{i}], x[{j}]}}": str(d) for (i, j), d in diff.items() if not d.is_zero()},
    }
    return out, EXIT_OK if agree else EXIT_NEGATIVE


def cmd_involution(args, rng):
    from .canonical import canonical_model
    from .poisson import check_involution, poisson_from_lagrangian

    m = canonical_model(args.case, **_abg(args))
    P = poisson_from_lagrangian(m.lagrangian)
    cert = check_involution(*m.invariants, P, samples=args.samples, seed=args.seed, force_sampling=args.sampled)
    return {"case": args.case, "certificate": cert.as_dict()}, EXIT_OK if cert.involutive else EXIT_NEGATIVE


def certify(case: int, alpha=None, beta=None, gamma=None, sampled: bool = False, samples: int = 200, seed: int = 0) -> dict:
    """Liouville certificate: invariance, skew-symmetry, Jacobi, preservation, involution, rank."""
    from .canonical import canonical_model
    from .family import check_invariance
    from .poisson import check_involution, check_jacobi, check_preservation, is_skew, poisson_from_lagrangian, rank_certificate

    vals = {k: v for k, v in (("alpha", alpha), ("beta", beta), ("gamma", gamma)) if v is not None}
    m = canonical_model(case, **vals)
    stages = {}
    t = time.perf_counter()
    inv = {}
    for name, F in zip("IJ", m.invariants):
        inv[name] = check_invariance(F, m.equation, samples=samples, seed=seed, force_sampling=sampled).as_dict()
    stages["invariance"] = {"passed": all(c["invariant"] for c in inv.values()), "detail": inv}
    P = poisson_from_lagrangian(m.lagrangian)
    stages["skew"] = {"passed": is_skew(P)}
    jac = check_jacobi(P)
    stages["jacobi"] = {"passed": all(r.is_zero() for r in jac.values())}
    pres = check_preservation(P, m.equation)
    stages["preservation"] = {"passed": all(r.is_zero() for r in pres.values())}
    cert = check_involution(*m.invariants, P, samples=samples, seed=seed, force_sampling=sampled)
    stages["involution"] = {"passed": cert.involutive, "detail": cert.as_dict()}
    stages["rank"] = {"passed": not rank_certificate(P).is_zero()}
    return {
        "case": case,
        "params": {k: str(v) for k, v in m.params.items()},
        "stages": stages,
        "passed": all(s["passed"] for s in stages.values()),
        "notes": m.notes,
        "seconds": round(time.perf_counter() - t, 3),
    }


def cmd_certify(args, rng):
    out = certify(args.case, **_abg(args), sampled=args.sampled, samples=args.samples, seed=args.seed)
    return out, EXIT_OK if out["passed"] else EXIT_NEGATIVE


def _orbit_map(args):
    from .dynamics import canonical_map, dissipative_map

    a, b, c = _abg_numeric(args)
    lam = _fraction(args.lam)
    return (canonical_map(args.case, a, b, c) if lam == 1 else dissipative_map(args.case, a, b, c, lam)), lam


def _random_state(rng) -> tuple:
    return tuple(Fraction(rng.randint(-50, 50), 1000) for _ in range(4))


def cmd_iterate(args, rng):
    from .canonical import canonical_model
    from .dynamics import drift_report, iterate, orbit_table, write_csv

    m, lam = _orbit_map(args)
    s0 = _state(args.initial) if args.initial else _random_state(rng)
    orbit = iterate(m, s0, args.steps, mode=args.mode)
    out = {"initial": [str(v) for v in s0], "lambda": str(lam), "orbit": orbit.summary()}
    invs = None
    if lam == 1:
        invs = canonical_model(args.case, *_abg_numeric(args)).invariants
        out["drift"] = drift_report(orbit, {"I": invs[0], "J": invs[1]})
    if args.out:
        write_csv(args.out, orbit_table(orbit, m, invs))
        out["csv"] = args.out
    return out, EXIT_OK if orbit.status == "ok" else EXIT_NEGATIVE


def cmd_volume(args, rng):
    from .dynamics import iterate, jacobian_det_symbolic, expected_jacobian, volume_law_deviation

    m, lam = _orbit_map(args)
    s0 = _state(args.initial) if args.initial else _random_state(rng)
    orbit = iterate(m, s0, args.steps)
    sym_ok = (jacobian_det_symbolic(m) - expected_jacobian(m)).is_zero()
    dev = volume_law_deviation(orbit, m)
    out = {
        "lambda": str(lam),
        "jacobian_symbolic_matches": sym_ok,
        "volume_law_max_deviation": dev,
        "orbit": orbit.summary(),
    }
    return out, EXIT_OK if sym_ok and dev < args.tol else EXIT_NEGATIVE


def cmd_contlim(args, rng):
    from . import contlim

    cases = [args.case] if args.case else [1, 2, 3, 4, 5]
    hs = contlim.ladder(args.ladder, args.h0)
    results = []
    ok = True
    for c in cases:
        cert = contlim.symbolic_limit(c)
        rep = contlim.convergence_order(c, hs=hs)
        entry = {"symbolic": cert.as_dict(), "ladder": rep.as_dict(), "rule": contlim.scaling_rule(c).as_dict()}
        if args.collapse and c != 5:
            entry["collapse"] = contlim.invariant_collapse_check(c, seed=args.seed).as_dict()
        ok &= cert.ok and rep.verdict
        results.append(entry)
    return {"cases": results, "verdict": "pass" if ok else "fail"}, EXIT_OK if ok else EXIT_NEGATIVE


def cmd_plot_data(args, rng):
    from .dynamics import iterate, phase_pairs

    m, lam = _orbit_map(args)
    s0 = _state(args.initial) if args.initial else (Fraction(1, 100),) * 4
    orbit = iterate(m, s0, args.steps)
    pairs = phase_pairs(orbit)
    series = orbit.series()
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "x_n", "x_n_plus_1"])
            for n, (a, b) in enumerate(pairs):
                w.writerow([n - 2, repr(float(a)), repr(float(b))])
    out = {
        "lambda": str(lam),
        "orbit": orbit.summary(),
        "points": len(pairs),
        "x_n_range": [float(series.min()), float(series.max())],
        "csv": args.out,
    }
    return out, EXIT_OK if orbit.status == "ok" else EXIT_NEGATIVE


# parser ---------------------------------------------------------------------


def _add_equation_flags(p):
    p.add_argument("--f", help="f in x[2] = f*x[-2] + h")
    p.add_argument("--h", help="h in x[2] = f*x[-2] + h")
    p.add_argument("--A", help="A in the cleared form A*x[2] + B*x[-2] + C = 0")
    p.add_argument("--B", help="B in the cleared form")
    p.add_argument("--C", help="C in the cleared form")
    p.add_argument("--equation", help="equation 'lhs = rhs' or an expression meaning expr = 0")
    p.add_argument("--json", help="JSON file with keys f,h or A,B,C or equation")


def _add_family_flags(p):
    for name in ("A1", "A2", "A3", "A5", "A6", "A7", "A8"):
        p.add_argument(f"--{name}", type=_fraction, help=f"family parameter {name} (symbolic when omitted)")
    p.add_argument("--json", help="JSON file with family parameters")


def _add_case_flags(p, required=True, numeric=False):
    p.add_argument("--case", type=int, choices=range(1, 6), required=required, help="canonical form 1-5")
    for name in ("alpha", "beta", "gamma"):
        p.add_argument(f"--{name}", type=_fraction, help=f"canonical parameter {name}" + ("" if numeric else " (symbolic when omitted)"))


def _add_sampling_flags(p):
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--symbolic", action="store_true", help="exact symbolic route (default)")
    mode.add_argument("--sampled", action="store_true", help="exact evaluation at random rational points")
    p.add_argument("--samples", type=int, default=200, help="number of sample points for --sampled")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="addlag", description="Variational analysis of additive fourth-order difference equations.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("--seed", type=int, default=0, help="seed for every randomized choice")
    ap.add_argument("--output", help="write the JSON envelope to this file as well")
    ap.add_argument("--no-timing", action="store_true", help="omit elapsed time (byte-identical reruns)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("test", help="seven-step variational test")
    _add_equation_flags(p)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("el", help="Euler-Lagrange equation of L(x[2], x[1], x[0])")
    p.add_argument("--lagrangian", required=True, help="L in the expression grammar; log and arctan allowed")
    p.add_argument("--lam", default="1", help="weight lambda of lambda^(-n) L")
    p.add_argument("--check", action="store_true", help="run the test on the result")
    p.set_defaults(func=cmd_el)

    p = sub.add_parser("family", help="family equation with both invariants")
    _add_family_flags(p)
    p.add_argument("--variant", choices=("printed", "corrected"), default="corrected", help="second invariant variant")
    p.add_argument("--check", action="store_true", help="certify invariance of I and J")
    _add_sampling_flags(p)
    p.set_defaults(func=cmd_family)

    p = sub.add_parser("classify", help="canonical form of numeric family parameters")
    _add_family_flags(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("poisson", help="Poisson brackets from the Ostrogradsky chart")
    _add_case_flags(p)
    p.add_argument("--literal", action="store_true", help="compare with the table exactly as printed")
    p.set_defaults(func=cmd_poisson)

    p = sub.add_parser("involution", help="certify {I, J} = 0")
    _add_case_flags(p)
    _add_sampling_flags(p)
    p.set_defaults(func=cmd_involution)

    p = sub.add_parser("certify", help="full Liouville certificate of a canonical form")
    _add_case_flags(p)
    _add_sampling_flags(p)
    p.set_defaults(func=cmd_certify)

    for name, func, default_steps, helptext in (
        ("iterate", cmd_iterate, 100, "orbit of a canonical map"),
        ("volume", cmd_volume, 1000, "Jacobian and volume law along an orbit"),
        ("plot-data", cmd_plot_data, 10_000, "(x_n, x_n+1) pairs for phase portraits"),
    ):
        p = sub.add_parser(name, help=helptext)
        _add_case_flags(p, numeric=True)
        p.add_argument("--lam", default="1", help="lambda; values other than 1 give the dissipative map")
        p.add_argument("--steps", type=int, default=default_steps, help="number of steps")
        p.add_argument("--initial", help="x1,x0,x-1,x-2 (random small rationals from --seed when omitted)")
        if name == "iterate":
            p.add_argument("--mode", choices=("float", "exact"), default="float", help="float or exact rational arithmetic")
        if name != "volume":
            p.add_argument("--out", help="CSV output path")
        else:
            p.add_argument("--tol", type=float, default=1e-6, help="tolerance on the volume law")
        p.set_defaults(func=func)

    p = sub.add_parser("contlim", help="continuum-limit checks")
    p.add_argument("--case", type=int, choices=range(1, 6), help="canonical form (all when omitted)")
    p.add_argument("--ladder", type=int, default=5, help="number of h values (at least 4)")
    p.add_argument("--h0", type=float, default=0.1, help="largest h; the ladder halves it")
    p.add_argument("--collapse", action="store_true", help="also measure the invariant collapse")
    p.set_defaults(func=cmd_contlim)
    return ap


def _echo(args) -> dict:
    skip = {"func", "output", "no_timing"}
    return {k: (str(v) if isinstance(v, Fraction) else v) for k, v in sorted(vars(args).items()) if k not in skip and v is not None}


def run(argv=None) -> tuple:
    """Parse ``argv``, run the job, return ``(exit_code, envelope)``."""
    from .expr import ExprError
    from .lagrangian import NotAdditive

    ap = build_parser()
    args = ap.parse_args(argv)
    rng = random.Random(args.seed)
    t0 = time.perf_counter()
    env = {"tool": "addlag", "version": __version__, "command": args.command, "input": _echo(args), "seed": args.seed}
    try:
        result, code = args.func(args, rng)
        env["status"] = "ok" if code == EXIT_OK else "negative"
        env["result"] = result
    except (InputError, ExprError, NotAdditive, argparse.ArgumentTypeError, ValueError, ZeroDivisionError) as exc:
        code = EXIT_INPUT
        env["status"] = "input-error"
        env["error"] = f"{type(exc).__name__}: {exc}"
    except Exception as exc:  # noqa: BLE001 - reported, not swallowed
        code = EXIT_INTERNAL
        env["status"] = "internal-error"
        env["error"] = f"{type(exc).__name__}: {exc}"
    if not args.no_timing:
        env["elapsed_seconds"] = round(time.perf_counter() - t0, 4)
    env["exit_code"] = code
    if args.output:
        Path(args.output).write_text(json.dumps(env, indent=2, default=str) + "\n")
    return code, env


def main(argv=None) -> int:
    code, env = run(argv)
    print(json.dumps(env, indent=2, default=str))
    return code


if __name__ == "__main__":
    sys.exit(main())
