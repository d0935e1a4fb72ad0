"""Acceptance criteria, each at its stated tolerance and runtime budget.

Every criterion records a PASS/FAIL line (shown in the pytest terminal summary).
The literal transcriptions that do not hold are kept at the bottom as strict xfails.
Run directly with ``python3 tests/test_acceptance.py`` to get only the nine lines.
"""

import random
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
import sympy as sp

sys.path.insert(0, str(Path(__file__).parent))

from acceptance_log import record  # noqa: E402
from oracles import X, to_sympy  # noqa: E402
from test_contlim import sympy_collapse_ratio, sympy_leading_term, sympy_total_derivative_on_shell  # noqa: E402
from test_lagrangian import FILTER_EXAMPLE, LINEAR, TANH_EXAMPLE, random_lagrangian  # noqa: E402

from addlag import contlim  # noqa: E402
from addlag.canonical import (  # noqa: E402
    canonical_equation,
    canonical_lagrangian,
    canonical_model,
    printed_brackets,
    printed_lagrangian,
    printed_parameter_map,
    to_canonical,
)
from addlag.dynamics import (  # noqa: E402
    canonical_map,
    dissipative_map,
    drift_report,
    figure1,
    iterate,
    jacobian_det_symbolic,
)
from addlag.expr import const, parse  # noqa: E402
from addlag.expr.closedform import parse_closed_form  # noqa: E402
from addlag.family import check_invariance, family_equation, family_equation_printed, invariant_I, invariant_J  # noqa: E402
from addlag.lagrangian import equation_key, euler_lagrange_expr, parse_equation, variational_test  # noqa: E402
from addlag.poisson import (  # noqa: E402
    check_involution,
    check_jacobi,
    check_preservation,
    compare_tables,
    is_skew,
    poisson_from_lagrangian,
)


class Clock:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0


def finish(number, title, checks, seconds):
    assert record(number, title, checks, seconds), [n for n, ok in checks if not ok]


# 1 ---------------------------------------------------------------------------


def test_criterion_1_worked_examples():
    checks = []
    t_all = 0.0
    with Clock() as c:
        r = variational_test(parse_equation(TANH_EXAMPLE))
        checks += [
            ("tanh: variational", r.verdict == "variational"),
            ("tanh: g = xi^3", r.structured.g == parse("xi^3")),
            ("tanh: lambda = 1", r.lagrangian.lam == const(1)),
            ("tanh: V", r.lagrangian.V == parse_closed_form("mu/2*(arctanh(xi) + arctanh(eta))")),
        ]
    checks.append(("tanh < 1 s", c.seconds < 1))
    t_all += c.seconds
    with Clock() as c:
        r = variational_test(parse_equation(FILTER_EXAMPLE.replace("a11", "2")))
        checks.append(("filter: closure residual", r.witness == parse("2*xi*eta*(lambda*a20 - a02)")))
        for lam in (1, -1):
            eq = FILTER_EXAMPLE.replace("a11", f"(2*{lam})").replace("a02", f"({lam}*a20)")
            checks.append((f"filter: variational at lambda={lam}", variational_test(parse_equation(eq)).verdict == "variational"))
        # "precisely when": breaking either relation loses variationality
        for a11, a02 in (("3", "a20"), ("2", "(2*a20)"), ("(-2)", "a20")):
            eq = FILTER_EXAMPLE.replace("a11", a11).replace("a02", a02)
            checks.append((f"filter: rejected a11={a11} a02={a02}", variational_test(parse_equation(eq)).verdict == "not-variational"))
    checks.append(("filter < 1 s per run", c.seconds / 6 < 1))
    t_all += c.seconds
    with Clock() as c:
        r = variational_test(parse_equation(LINEAR))
        checks.append(("linear: closure lambda*c1 = cm1 with lambda^2 = cm2", r.witness == parse("lambda*c1 - cm1") and r.structured.lam2 == parse("cm2")))
        checks.append(("linear: accepted at cm2 = (cm1/c1)^2", variational_test(parse_equation(LINEAR.replace("cm2", "(cm1/c1)^2"))).verdict == "variational"))
        checks.append(("linear: rejected off the relation", variational_test(parse_equation(LINEAR.replace("cm2", "(cm1/c1)^2 + 1"))).verdict == "not-variational"))
    checks.append(("linear < 1 s per run", c.seconds / 3 < 1))
    t_all += c.seconds
    finish(1, "worked examples reproduce verdicts, witnesses and potentials exactly", checks, t_all)


# 2 ---------------------------------------------------------------------------


def test_criterion_2_family_invariance():
    checks = []
    with Clock() as c:
        E = family_equation()
        for name, F in (("I", invariant_I()), ("J", invariant_J(variant="corrected"))):
            sym_cert = check_invariance(F, E)
            checks.append((f"{name} symbolic residual zero", sym_cert.invariant and sym_cert.method == "symbolic"))
            smp = check_invariance(F, E, force_sampling=True, samples=200, seed=11)
            checks.append((f"{name} exact sampling at 200 points", smp.invariant and smp.samples == 200))
    checks.append(("within 10 min", c.seconds < 600))
    finish(2, "I and J invariant for fully symbolic parameters (J with the corrected terms)", checks, c.seconds)


# 3 ---------------------------------------------------------------------------


def test_criterion_3_bracket_tables():
    checks = []
    with Clock() as c:
        for case in range(1, 6):
            t0 = time.perf_counter()
            m = canonical_model(case)
            P = poisson_from_lagrangian(m.lagrangian)
            checks.append((f"case {case} table", all(d.is_zero() for d in compare_tables(P, printed_brackets(case)).values())))
            checks.append((f"case {case} skew", is_skew(P)))
            checks.append((f"case {case} Jacobi", all(r.is_zero() for r in check_jacobi(P).values())))
            checks.append((f"case {case} preserved", all(r.is_zero() for r in check_preservation(P, m.equation).values())))
            checks.append((f"case {case} involution", check_involution(*m.invariants, P).involutive))
            checks.append((f"case {case} within 5 min", time.perf_counter() - t0 < 300))
    finish(3, "bracket tables, skew, Jacobi, preservation, involution (case-3 middle entry corrected)", checks, c.seconds)


# 4 ---------------------------------------------------------------------------


def test_criterion_4_round_trip():
    checks = []
    lams = [const(1), const(2), const(Fraction(1, 3)), const(-1)]
    bad = []
    with Clock() as c:
        for seed in range(100):
            L = random_lagrangian(random.Random(1000 + seed))
            lam = lams[seed % 4]
            E = euler_lagrange_expr(L, lam)
            r = variational_test(E)
            if r.verdict != "variational" or equation_key(r.lagrangian.euler_lagrange()) != equation_key(E):
                bad.append(seed)
    checks.append(("100 Lagrangians round-trip" + (f" (bad seeds {bad})" if bad else ""), not bad))
    checks.append(("under 1 min", c.seconds < 60))
    finish(4, "test after Euler-Lagrange recovers the same equation for 100 random Lagrangians", checks, c.seconds)


# 5 ---------------------------------------------------------------------------

# g of each template, read off the template equations
TEMPLATE_G = {1: "x^2 - 1", 2: "x^2", 3: "x^2 + 1", 4: "x", 5: "1"}


def sympy_jacobian(equation):
    E = sp.together(to_sympy(equation))
    num = sp.numer(E)  # the equation is linear in x[2]
    x2 = -num.subs(X(2), 0) / sp.diff(num, X(2))
    old = [X(1), X(0), X(-1), X(-2)]
    new = [x2, X(1), X(0), X(-1)]
    return sp.Matrix([[sp.diff(a, b) for b in old] for a in new]).det(method="laplace")


def test_criterion_5_volume_law():
    checks = []
    x = sp.Symbol("x")
    with Clock() as c:
        for case in range(1, 6):
            for lam in (1, Fraction(999, 1000)):
                m = canonical_map(case, 1, 2, 3) if lam == 1 else dissipative_map(case, 1, 2, 3, lam)
                g = sp.sympify(TEMPLATE_G[case])
                law = sp.Rational(lam) ** 2 * g.subs(x, X(-1)) / g.subs(x, X(1))
                ours = to_sympy(jacobian_det_symbolic(m))
                checks.append((f"case {case} lambda={lam} det equals law", sp.cancel(ours - law) == 0))
                checks.append((f"case {case} lambda={lam} sympy det agrees", sp.cancel(sympy_jacobian(m.equation) - law) == 0))
        t0 = time.perf_counter()
        f = figure1()
        _, cons = f["conservative"]
        _, diss = f["dissipative"]
        tail = np.abs(diss.series()[-1000:]).max()
        checks.append((f"dissipative final 1000 max |x| = {tail:.2e} < 1e-3", diss.status == "ok" and diss.steps == 10_000 and tail < 1e-3))
        xs = cons.series()
        checks.append(("conservative orbit completes 1e4 steps", cons.status == "ok" and cons.steps == 10_000))
        checks.append(("conservative bounded away from 0", np.linalg.norm(cons.as_float(), axis=1).min() > 1e-2))
        checks.append(("conservative bounded away from poles |x| = 1", np.abs(np.abs(xs) - 1).min() > 0.1))
        checks.append(("figure orbits within 5 s", time.perf_counter() - t0 < 5))
    finish(5, "Jacobian equals lambda^2 g(x[-1])/g(x[1]); dissipative orbit collapses, conservative stays bounded", checks, c.seconds)


# 6 ---------------------------------------------------------------------------


def test_criterion_6_exact_drift():
    checks = []
    rng = random.Random(6)
    p = (Fraction(1, 2), Fraction(1, 3), Fraction(-1, 5))
    with Clock() as c:
        for case in range(1, 6):
            t0 = time.perf_counter()
            s = tuple(Fraction(rng.randint(-9, 9), rng.randint(50, 200)) for _ in range(4))
            orbit = iterate(canonical_map(case, *p), s, 50, mode="exact")
            I, J = canonical_model(case, *p).invariants
            rep = drift_report(orbit, {"I": I, "J": J})
            ok = orbit.status == "ok" and orbit.steps == 50 and rep["I"]["exact_zero"] and rep["J"]["exact_zero"]
            checks.append((f"case {case}: 50 exact steps, zero drift", ok))
            checks.append((f"case {case}: under 1 min", time.perf_counter() - t0 < 60))
    finish(6, "exact rational orbits conserve I and J exactly", checks, c.seconds)


# 7 ---------------------------------------------------------------------------


def test_criterion_7_continuum_limits():
    checks = []
    hs = [0.1 * 2.0 ** -k for k in range(5)]
    with Clock() as c:
        for case in range(1, 6):
            rep = contlim.convergence_order(case, hs=hs)
            checks.append((f"case {case} slope {rep.slope:.3f} in [0.8, 2.5]", rep.verdict and 0.8 <= rep.slope <= 2.5))
            cert = contlim.symbolic_limit(case)
            checks.append((f"case {case} symbolic limit", cert.ok))
        for case in (2, 5):
            order, coeff = sympy_leading_term(case)
            cert = contlim.symbolic_limit(case)
            tgt = to_sympy(contlim.target(cert.target).residual)
            ok = order == cert.power and sp.simplify(coeff - sp.Rational(cert.scalar.numerator, cert.scalar.denominator) * tgt) == 0
            checks.append((f"case {case} limit confirmed by sympy expansion", ok))
        for tag in ("PI2", "PII2"):
            checks.append((f"{tag} Lagrangian", contlim.continuum_lagrangian_check(tag).ok))
        checks.append(("linear Lagrangian (r2 coefficient corrected)", contlim.continuum_lagrangian_check("Linear4", corrected=True).ok))
        for tag in ("PI2", "PII2"):
            for i, K in enumerate(contlim.continuum_integrals(tag), 1):
                ours = contlim.conservation_residual(K, contlim.target(tag)).is_zero()
                theirs = sympy_total_derivative_on_shell(K, tag) == 0
                checks.append((f"{tag} dK{i}/dt = 0 (both routes)", ours and theirs))
            ratios = contlim.drift_ratio(tag)
            checks.append((f"{tag} RK4 drift ratios {[round(q, 1) for q in ratios]} in [8, 32]", all(8 <= q <= 32 for q in ratios)))
    checks.append(("under 2 min", c.seconds < 120))
    finish(7, "continuum limits, Lagrangians, conserved integrals (corrected K), fourth-order drift", checks, c.seconds)


# 8 ---------------------------------------------------------------------------


def test_criterion_8_invariant_collapse():
    checks = []
    with Clock() as c:
        for case, printed in ((2, -0.5), (4, 2.0)):
            rep = contlim.invariant_collapse_check(case, "I", h=1e-3)
            err = abs(rep.slope - printed) / abs(printed)
            exact = float(sympy_collapse_ratio(case))
            checks.append((f"case {case} measured {rep.slope:.4f} agrees with exact sympy ratio {exact}", abs(rep.slope - exact) < 1e-4 * abs(exact)))
            checks.append((f"case {case} I/h^8 coefficient {rep.slope:.4f} vs printed {printed} (within 5%)", err < 0.05))
        for which in "IJ":
            rep = contlim.invariant_collapse_check(1, which, h=1e-3)
            checks.append((f"case 1 {which} proportional to K1 (R^2 = {rep.r_squared:.6f})", rep.r_squared > 0.999))
    finish(8, "leading coefficients of the collapsing invariants", checks, c.seconds)


# 9 ---------------------------------------------------------------------------


def test_criterion_9_beam():
    checks = []
    params = ("alpha", "omega", "beta", "h")
    with Clock() as c:
        triv = variational_test(parse(contlim.TRIVIAL_BEAM, params=params))
        checks.append(("trivial discretisation rejected", triv.verdict == "not-additive"))
        E = parse(contlim.VARIATIONAL_BEAM, params=params)
        r = variational_test(E)
        checks.append(("variational discretisation accepted", r.verdict == "variational" and r.lagrangian is not None))
        if r.lagrangian is not None:
            EL = r.lagrangian.euler_lagrange()
            checks.append(("emitted Lagrangian regenerates the scheme", equation_key(EL) == equation_key(E)))
            # normalise both to x[2] coefficient 1 and compare the omega and beta terms
            a, b = E / E.diff("x[2]"), EL / EL.diff("x[2]")
            om_a = a.diff("omega").diff("x[0]")
            om_b = b.diff("omega").diff("x[0]")
            checks.append(("omega term", om_a == om_b and om_a == parse("-2*omega*h^4")))
            checks.append(("beta term", a.diff("beta") == b.diff("beta") == parse("-h^4")))
    checks.append(("under 1 s", c.seconds < 1))
    finish(9, "beam discretisations: trivial rejected, variational accepted with its Lagrangian", checks, c.seconds)


# literal transcriptions that do not hold ------------------------------------


@pytest.mark.xfail(strict=True, reason="printed J is not invariant; see the decisions ledger")
def test_literal_printed_J_invariant():
    assert check_invariance(invariant_J(variant="printed"), family_equation(), force_sampling=True, samples=50).invariant


@pytest.mark.xfail(strict=True, reason="printed general equation has A3*A8 on the x[0] term")
def test_literal_printed_family_equation_keeps_I():
    assert check_invariance(invariant_I(), family_equation_printed()).invariant


@pytest.mark.xfail(strict=True, reason="case-1 parameter map only holds under the consistent reading")
def test_literal_case1_parameter_map():
    a, b, g = Fraction(3, 2), Fraction(-1, 3), Fraction(5, 7)
    cc, _ = to_canonical(printed_parameter_map(1, a, b, g, A8=1, kappa=2, x1=-1, x2=3))
    assert (cc.alpha, cc.beta, cc.gamma) == (const(a), const(b), const(g))


@pytest.mark.xfail(strict=True, reason="printed case-3 Lagrangian has swapped halves")
def test_literal_case3_lagrangian():
    assert equation_key(euler_lagrange_expr(printed_lagrangian(3))) == equation_key(canonical_equation(3))


@pytest.mark.xfail(strict=True, reason="case-3 middle bracket printed with x[1]^2 for x[-1]^2")
def test_literal_case3_bracket_table():
    P = poisson_from_lagrangian(canonical_lagrangian(3))
    assert all(d.is_zero() for d in compare_tables(P, printed_brackets(3, corrected=False)).values())


@pytest.mark.xfail(strict=True, reason="printed linear Lagrangian carries r1 where r2 belongs")
def test_literal_linear_lagrangian():
    assert contlim.continuum_lagrangian_check("Linear4").ok


@pytest.mark.xfail(strict=True, reason="printed weighted linear Lagrangian carries the same r1/r2 slip")
def test_literal_weighted_linear_lagrangian():
    assert contlim.fels_lagrangian_check().ok


@pytest.mark.xfail(strict=True, reason="printed K integrals are not conserved")
@pytest.mark.parametrize("tag", ["PI2", "PII2"])
def test_literal_printed_integrals_conserved(tag):
    assert all(sympy_total_derivative_on_shell(K, tag) == 0 for K in contlim.printed_integrals(tag))


@pytest.mark.xfail(strict=True, reason="variational beam scheme limits to -omega^2 x, the beam equation has +omega^2 x")
def test_literal_beam_scheme_limit():
    assert contlim.beam_limit()["residual"].is_zero()


if __name__ == "__main__":
    for name, fn in list(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                pass
