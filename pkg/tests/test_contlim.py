import math

import mpmath
import pytest
import sympy as sp
from sympy.calculus.euler import euler_equations

from addlag import contlim
from addlag.canonical import canonical_equation, canonical_model
from addlag.expr import parse
from addlag.lagrangian import variational_test

from oracles import X, jet_symbol, to_sympy

h = sp.Symbol("h")
R = {n: sp.Symbol(n) for n in ("r0", "r1", "r2", "r3")}


def sympy_leading_term(case):
    """Expand the scaled canonical equation in h with sympy; return (order, coefficient)."""
    rule = contlim.scaling_rule(case)
    p = rule.power
    loc = {"h": h, **R}
    scale = sp.sympify(rule.scale.replace("^", "**"), locals=loc)
    shift = sp.sympify(rule.shift)
    sub = {}
    for k in range(-2, 3):
        taylor = sum(jet_symbol(j) * (k * h) ** j / sp.factorial(j) for j in range(p + 2))
        sub[X(k)] = scale * taylor + shift
    for a, v in rule.params.items():
        sub[sp.Symbol(a)] = sp.sympify(v.replace("^", "**"), locals=loc)
    num, den = sp.fraction(sp.together(to_sympy(canonical_equation(case)).xreplace(sub)))
    nc = sp.Poly(sp.expand(num), h).all_coeffs()[::-1]
    dc = sp.Poly(sp.expand(den), h).all_coeffs()[::-1]
    d0 = next(i for i, c in enumerate(dc) if c != 0)
    lead = next(i for i, c in enumerate(nc) if sp.expand(c) != 0)
    return lead - d0, sp.simplify(nc[lead] / dc[d0])


def sympy_next_order_vanishes(case):
    """The h^(p+1) term of the scaled equation, taken from a full series in h."""
    rule = contlim.scaling_rule(case)
    p = rule.power
    loc = {"h": h, **R}
    scale = sp.sympify(rule.scale.replace("^", "**"), locals=loc)
    shift = sp.sympify(rule.shift)
    sub = {X(k): scale * sum(jet_symbol(j) * (k * h) ** j / sp.factorial(j) for j in range(p + 3)) + shift for k in range(-2, 3)}
    for a, v in rule.params.items():
        sub[sp.Symbol(a)] = sp.sympify(v.replace("^", "**"), locals=loc)
    num, den = sp.fraction(sp.together(to_sympy(canonical_equation(case)).xreplace(sub)))
    ser = sp.series(sp.expand(num) / sp.expand(den), h, 0, p + 2).removeO()
    return sp.simplify(sp.expand(ser).coeff(h, p + 1)) == 0


@pytest.mark.parametrize("case", [2, 5])
def test_symbolic_limit_matches_sympy_expansion(case):
    cert = contlim.symbolic_limit(case)
    order, coeff = sympy_leading_term(case)
    assert order == cert.power
    tgt = to_sympy(contlim.target(cert.target).residual)
    assert sp.simplify(coeff - sp.Rational(cert.scalar.numerator, cert.scalar.denominator) * tgt) == 0


@pytest.mark.parametrize("case,scalar", [(1, -1), (2, sp.Rational(1, 2)), (3, 2), (4, 1), (5, 1)])
def test_symbolic_limit_all_cases(case, scalar):
    cert = contlim.symbolic_limit(case)
    assert cert.ok and cert.lower_orders_vanish and cert.residual.is_zero()
    assert cert.scalar == scalar


def test_scaling_rule_constants_are_fixed_points():
    # at h = 0 the scaled map must reduce to the trivial linear stencil
    assert contlim.scaling_rule(5).constant_terms() == {"alpha": 0, "beta": 6, "gamma": -4}
    with pytest.raises(ValueError):
        contlim.scaling_rule(6)


@pytest.mark.parametrize("case", [4, 5])
def test_reflection_symmetry_kills_first_correction(case):
    # so the deviation is O(h^2), which is the slope the ladder measures
    assert sympy_next_order_vanishes(case)


@pytest.mark.parametrize("case", [1, 2, 3, 4, 5])
def test_convergence_slope(case):
    rep = contlim.convergence_order(case)
    assert rep.verdict and 1.8 < rep.slope < 2.2  # centred stencil: second order


def test_slope_is_stable_under_longer_ladder():
    a = contlim.convergence_order(3).slope
    b = contlim.convergence_order(3, hs=contlim.ladder(8)).slope
    assert abs(a - b) < 0.05


def test_zero_function_underflow_is_reported():
    # x = 0 solves the scaled case-5 equation only if r3 = 0; then the residual vanishes identically
    with pytest.raises(ArithmeticError):
        contlim.convergence_order(5, x=contlim.ZERO, r=(1, 1, 0))


def sympy_el_of(L_text):
    t = sp.Symbol("t")
    x = sp.Function("x")(t)
    L = to_sympy(parse(L_text)).subs({jet_symbol(2): x.diff(t, 2), jet_symbol(1): x.diff(t)}).subs(jet_symbol(0), x)
    (eq,) = euler_equations(L, [x], t)
    expr = eq.lhs
    back = {x.diff(t, k): jet_symbol(k) for k in range(4, 0, -1)}
    for k in range(4, 0, -1):
        expr = expr.subs(x.diff(t, k), back[x.diff(t, k)])
    return sp.expand(expr.subs(x, jet_symbol(0)))


@pytest.mark.parametrize("tag", ["PI2", "PII2", "Linear4"])
def test_continuum_euler_lagrange_matches_sympy(tag):
    L = contlim.continuum_lagrangian(tag)
    ours = contlim.euler_lagrange_continuum(L)
    assert sp.expand(to_sympy(ours) - sympy_el_of(str(L))) == 0


@pytest.mark.parametrize("tag", ["PI2", "PII2"])
def test_printed_continuum_lagrangians(tag):
    chk = contlim.continuum_lagrangian_check(tag)
    assert chk.ok and chk.scalar == 1


def test_linear_lagrangian_printed_has_r1_for_r2():
    printed = contlim.continuum_lagrangian_check("Linear4")
    assert not printed.ok and printed.residual == parse("x*r1 - x*r2")
    assert contlim.continuum_lagrangian_check("Linear4", corrected=True).ok


def test_weighted_linear_lagrangian():
    assert not contlim.fels_lagrangian_check().ok
    assert contlim.fels_lagrangian_check(corrected=True).ok


def sympy_total_derivative_on_shell(K, tag):
    """dK/dt with x'''' eliminated through the target, computed in sympy."""
    Ks = to_sympy(K)
    tgt = to_sympy(contlim.target(tag).residual)
    d4 = sp.solve(tgt, jet_symbol(4))[0]
    dK = sum(sp.diff(Ks, jet_symbol(k)) * jet_symbol(k + 1) for k in range(4))
    return sp.expand(dK.subs(jet_symbol(4), d4))


@pytest.mark.parametrize("tag", ["PI2", "PII2"])
def test_corrected_integrals_conserved(tag):
    for K in contlim.continuum_integrals(tag):
        assert contlim.conservation_residual(K, contlim.target(tag)).is_zero()
        assert sympy_total_derivative_on_shell(K, tag) == 0


@pytest.mark.parametrize("tag", ["PI2", "PII2"])
def test_printed_integrals_not_conserved(tag):
    for K in contlim.printed_integrals(tag):
        assert sympy_total_derivative_on_shell(K, tag) != 0


def test_first_integral_corrections_are_small():
    pi = contlim.correct_integral("PI2", 1)
    assert not pi.conserved_as_printed and len(pi.changed) == 1
    pii = contlim.correct_integral("PII2", 1)
    assert len(pii.changed) == 3


@pytest.mark.parametrize("tag,weight", [("PI2", 8), ("PII2", 6)])
def test_lowest_integral_space_is_spanned_by_corrected_K1(tag, weight):
    assert all(not contlim.integral_space(tag, w) for w in range(2, weight))
    (basis,) = contlim.integral_space(tag, weight)
    K1 = contlim.continuum_integrals(tag)[0]
    assert (K1 / basis).is_constant()


@pytest.mark.parametrize("tag", ["PI2", "PII2"])
def test_rk4_drift_ratio_fourth_order(tag):
    ratios = contlim.drift_ratio(tag)
    assert all(8 <= q <= 32 for q in ratios)


def test_rk4_order_on_exact_solution():
    # r = (0, 1, 0) gives x'''' + x = 0, solved by exp(w t) cos(w t)
    field = contlim._vector_field("Linear4", (0, 1, 0))
    w = 1 / math.sqrt(2)
    exact = lambda t: math.exp(w * t) * math.cos(w * t)  # noqa: E731

    def derivs(t):
        return [mpmath.diff(lambda s: mpmath.exp(w * s) * mpmath.cos(w * s), t, k) for k in range(4)]

    y0 = [float(v) for v in derivs(0)]
    errs = []
    for hh in (0.02, 0.01):
        ys = contlim.rk4(field, y0, hh, int(round(1 / hh)))
        errs.append(abs(ys[-1][0] - exact(1.0)))
    assert 12 < errs[0] / errs[1] < 20


def test_reference_run_flags_blowup():
    rep = contlim.ode_reference_run("PI2", r=(0, 0, 0), ic=(5, 5, 5, 5), h=0.01, n=1000)
    assert rep.blowup
    with pytest.raises(ValueError):
        contlim.ode_reference_run("PI2", h=0.1, n=200)


def test_characteristic_root_convergence():
    rep = contlim.char_root_convergence()
    assert 0.9 < rep.slope < 1.1


def sympy_collapse_ratio(case):
    """Exact h^p coefficient of the scaled I, reduced on shell, divided by K1."""
    rule = contlim.scaling_rule(case)
    loc = {"h": h, **R}
    p = rule.invariant_power
    n = p + 1
    scale = sp.sympify(rule.scale.replace("^", "**"), locals=loc)
    shift = sp.sympify(rule.shift)
    jets = [jet_symbol(j) for j in range(n)]
    sub = {X(k): scale * sum(jets[j] * (k * h) ** j / sp.factorial(j) for j in range(n)) + shift for k in (1, 0, -1, -2)}
    for a, v in rule.params.items():
        sub[sp.Symbol(a)] = sp.sympify(v.replace("^", "**"), locals=loc)
    num, den = sp.fraction(sp.together(to_sympy(canonical_model(case).invariants[0])))
    ser = sp.expand(sp.series(sp.expand(num.xreplace(sub)) / sp.expand(den.xreplace(sub)), h, 0, p + 1).removeO())
    # every lower order must be a solution-independent constant
    assert all(not (ser.coeff(h, k).free_symbols & set(jets)) for k in range(-12, p))
    c = ser.coeff(h, p)
    d4 = sp.solve(to_sympy(contlim.target(rule.target).residual), jets[4])[0]
    higher = {4: d4}
    for j in range(5, n):
        higher[j] = sp.expand(sum(sp.diff(higher[j - 1], jets[i]) * jets[i + 1] for i in range(4)).subs(jets[4], d4))
    for j in range(n - 1, 3, -1):
        c = c.subs(jets[j], higher[j])
    K = to_sympy(contlim.continuum_integrals(rule.target)[0])
    free = {v: 0 for v in jets[:4]}
    return sp.cancel((sp.expand(c) - sp.expand(c).subs(free)) / (K - K.subs(free)))


@pytest.mark.parametrize("case,which", [(2, "I"), (3, "I"), (3, "J"), (4, "J")])
def test_collapse_matches_printed(case, which):
    rep = contlim.invariant_collapse_check(case, which)
    assert rep.ok and rep.r_squared > 0.999


def test_collapse_case1_proportional():
    for which in "IJ":
        rep = contlim.invariant_collapse_check(1, which)
        assert rep.printed is None and rep.ok


@pytest.mark.parametrize("case,exact", [(2, sp.Rational(-1, 2)), (4, -2)])
def test_collapse_coefficient_matches_sympy(case, exact):
    assert sympy_collapse_ratio(case) == exact
    assert contlim.invariant_collapse_check(case, "I").slope == pytest.approx(float(exact), rel=1e-5)


def test_beam():
    out = contlim.beam_limit()
    assert out["lower_orders_vanish"] and out["lagrangian_el_ok"]
    assert out["residual"] == parse("-2*omega^2*x")
    params = ("alpha", "omega", "beta", "h")
    assert variational_test(parse(contlim.TRIVIAL_BEAM, params=params)).verdict == "not-additive"
    r = variational_test(parse(contlim.VARIATIONAL_BEAM, params=params))
    assert r.verdict == "variational"
