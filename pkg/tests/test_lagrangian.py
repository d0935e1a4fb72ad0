import random
from fractions import Fraction

import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from addlag.expr import const, parse, sym
from addlag.expr.closedform import parse_closed_form
from addlag.lagrangian import (
    RawAdditiveEquation,
    additive_form,
    clear_denominators,
    equation_key,
    euler_lagrange_expr,
    parse_equation,
    variational_test,
)

from oracles import euler_lagrange as sympy_el
from oracles import to_sympy

TANH_EXAMPLE = "x[2]/x[-1]^3 + x[-2]/x[1]^3 + (3*x[0]^2 - mu/((x[0]^2 - 1)*x[-1]*x[1]))/(x[-1]^2*x[1]^2)"
FILTER_EXAMPLE = "x[-1]^2*x[-2] + x[1]^2*x[2] + 1/(1 - x[0]) + x[0]*(a02*x[-1]^2 + a11*x[-1]*x[1] + a20*x[1]^2)"
LINEAR = "x[2] + c1*x[1] + c0*x[0] + cm1*x[-1] + cm2*x[-2] + b"


def random_lagrangian(rng):
    def q():
        return Fraction(rng.randint(-4, 4), rng.randint(1, 3))

    g = sum((const(q()) * sym("x[1]") ** k for k in range(rng.randint(1, 4))), const(0))
    if g.is_zero():
        g = const(1)
    V = sum(
        (const(q()) * sym("x[1]") ** i * sym("x[0]") ** j for i in range(5) for j in range(5 - i) if rng.random() < 0.4),
        const(0),
    )
    return g * sym("x[0]") * sym("x[2]") + V


def test_tanh_example():
    r = variational_test(parse_equation(TANH_EXAMPLE))
    assert r.verdict == "variational"
    assert r.structured.g == parse("xi^3")
    assert r.lagrangian.lam == const(1)
    assert r.lagrangian.V == parse_closed_form("mu/2*(arctanh(xi) + arctanh(eta))")


def test_filter_example_mixed_partial_forces_a11():
    r = variational_test(parse_equation(FILTER_EXAMPLE))
    assert r.verdict == "not-variational" and r.failing_step == 4
    assert r.witness == parse("x[0]*a11 - 2*x[0]*lambda")


def test_filter_example_closure_residual():
    r = variational_test(parse_equation(FILTER_EXAMPLE.replace("a11", "2")))
    assert r.failing_step == 6
    assert r.witness == parse("2*xi*eta*(lambda*a20 - a02)")


@pytest.mark.parametrize("lam", [1, -1])
def test_filter_example_variational_branch(lam):
    eq = FILTER_EXAMPLE.replace("a11", f"(2*{lam})").replace("a02", f"({lam}*a20)")
    r = variational_test(parse_equation(eq))
    assert r.verdict == "variational" and r.lagrangian.lam == const(lam)
    expect = parse_closed_form(f"1/2*(a20*xi^2*eta^2 - log(eta - 1) - 1/({lam})*log(xi - 1))")
    assert r.lagrangian.V == expect


def test_filter_example_wrong_relation_rejected():
    r = variational_test(parse_equation(FILTER_EXAMPLE.replace("a11", "2").replace("a02", "(-a20)")))
    assert r.verdict == "not-variational"


def test_linear_closure():
    r = variational_test(parse_equation(LINEAR))
    assert r.verdict == "not-variational" and r.failing_step == 6
    assert r.witness == parse("lambda*c1 - cm1")
    assert r.structured.lam2 == parse("cm2")


def test_linear_accepts_square_relation():
    r = variational_test(parse_equation(LINEAR.replace("cm2", "(cm1/c1)^2")))
    assert r.verdict == "variational"
    assert r.lagrangian.lam == parse("cm1/c1")
    assert equation_key(r.lagrangian.euler_lagrange()) == equation_key(parse_equation(LINEAR.replace("cm2", "(cm1/c1)^2")))


def test_linear_rejects_numeric_mismatch():
    assert variational_test(parse_equation(LINEAR.replace("cm2", "4").replace("cm1", "3*c1"))).verdict == "not-variational"


def test_negative_lambda_squared_rejected():
    r = variational_test(("1", "x[1]"))
    assert r.failing_step == 2


def test_not_additive():
    r = variational_test(parse_equation("x[2]^2 + x[-2] + x[0]"))
    assert r.verdict == "not-additive" and r.failing_step == 1


def test_input_forms_agree():
    f, h = "-x[-1]^2/x[1]^2", "-(2*x[0]*x[1]*x[-1] + x[0])/x[1]^2"
    a = variational_test((f, h)).verdict
    b = variational_test(f"{f};{h}").verdict
    c = variational_test(clear_denominators(parse(f), parse(h))).verdict
    d = variational_test(f"x[2] = ({f})*x[-2] + {h}").verdict
    assert a == b == c == d == "variational"


def test_additive_form_is_cleared():
    raw = additive_form(parse_equation("x[2]/x[0] + x[-2]/x[0] + 1/x[1]"))
    assert isinstance(raw, RawAdditiveEquation)
    # A and B are cleared; C keeps the leftover denominator
    assert raw.A.denominator() == const(1) and raw.B.denominator() == const(1)
    assert raw.A == const(1) and raw.B == const(1) and raw.C == parse("x[0]/x[1]")


@pytest.mark.parametrize(
    "L,lam",
    [
        ("x[1]^2*x[0]*x[2] + x[0]^2*x[1]^2", 1),
        ("x[0]*x[2] + log(x[1] - 1) + x[0]*x[1]", 2),
        ("(x[1] + 1)*x[0]*x[2] + arctan(x[0])", Fraction(1, 3)),
    ],
)
def test_euler_lagrange_against_sympy(L, lam):
    E = euler_lagrange_expr(parse_closed_form(L), lam)
    ref = sympy_el(to_sympy(parse_closed_form(L)), lam)
    assert sp.simplify(to_sympy(E) - ref) == 0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([Fraction(1), Fraction(2), Fraction(1, 3), Fraction(-1)]))
def test_round_trip_property(seed, lam):
    L = random_lagrangian(random.Random(seed))
    E = euler_lagrange_expr(L, lam)
    r = variational_test(E)
    assert r.verdict == "variational"
    assert equation_key(r.lagrangian.euler_lagrange()) == equation_key(E)


def test_report_dict_is_serialisable():
    import json

    d = variational_test(parse_equation(TANH_EXAMPLE)).as_dict()
    json.dumps(d)
    assert [s["step"] for s in d["steps"]] == list(range(1, 8))
