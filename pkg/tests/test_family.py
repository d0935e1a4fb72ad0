from fractions import Fraction

import pytest
import sympy as sp

from addlag.expr import const, parse, sym
from addlag.family import (
    PARAMS,
    check_invariance,
    family_equation,
    family_equation_printed,
    family_lagrangian,
    forward_map,
    g_poly,
    invariant_I,
    invariant_J,
    push_forward,
    sampled_invariance,
)
from addlag.lagrangian import equation_key, variational_test

from oracles import X, to_sympy

NUMERIC = [
    {"A1": 1, "A2": 2, "A3": 3, "A5": 1, "A6": -2, "A7": 1, "A8": 2},
    {"A1": 0, "A2": 1, "A3": -1, "A5": Fraction(1, 2), "A6": 3, "A7": 0, "A8": -1},
    {"A1": Fraction(2, 3), "A2": 0, "A3": 5, "A5": 0, "A6": 1, "A7": -2, "A8": 0},
]


def sympy_orbit_values(values, F, steps=6):
    """Iterate the equation with sympy rationals and record F along the orbit."""
    E = to_sympy(family_equation(values))
    x2 = sp.solve(E, X(2))
    assert len(x2) == 1
    Fs = to_sympy(F)
    w = [sp.Rational(1, 3), sp.Rational(-1, 5), sp.Rational(2, 7), sp.Rational(1, 2)]
    out = []
    for _ in range(steps):
        out.append(sp.nsimplify(Fs.subs(dict(zip((X(1), X(0), X(-1), X(-2)), w)))))
        w = [sp.nsimplify(x2[0].subs(dict(zip((X(1), X(0), X(-1), X(-2)), w))))] + w[:3]
    return out


@pytest.mark.parametrize("values", NUMERIC)
def test_I_constant_on_sympy_orbit(values):
    vals = sympy_orbit_values(values, invariant_I(values))
    assert len(set(vals)) == 1


@pytest.mark.parametrize("values", NUMERIC)
def test_corrected_J_constant_on_sympy_orbit(values):
    vals = sympy_orbit_values(values, invariant_J(values, variant="corrected"))
    assert len(set(vals)) == 1


def test_symbolic_invariance_of_I_and_corrected_J():
    E = family_equation()
    for F in (invariant_I(), invariant_J(variant="corrected")):
        cert = check_invariance(F, E)
        assert cert.invariant and cert.method == "symbolic"


def test_sampled_route_agrees():
    E = family_equation()
    cert = check_invariance(invariant_J(variant="corrected"), E, force_sampling=True, samples=50, seed=3)
    assert cert.invariant and cert.method == "sampled" and cert.samples == 50


def test_budget_overflow_falls_back_to_sampling():
    cert = check_invariance(invariant_I(), family_equation(), budget=10, samples=20)
    assert cert.invariant and cert.method == "sampled"
    assert any("budget" in (n or "") for n in cert.notes)


def test_printed_J_is_not_invariant():
    cert = check_invariance(invariant_J(variant="printed"), family_equation(), force_sampling=True, samples=20)
    assert not cert.invariant


def test_sampling_detects_a_mutation():
    E = family_equation()
    bad = invariant_I() + sym("x[1]") * sym("x[0]")
    assert not sampled_invariance(bad, forward_map(E), samples=20).invariant


def test_family_equation_is_its_own_lagrangian_equation():
    r = variational_test(family_equation(NUMERIC[0]))
    assert r.verdict == "variational"
    assert r.structured.g == g_poly(NUMERIC[0])


def test_printed_general_equation_differs_by_A3A8_term():
    diff = family_equation_printed() - family_equation()
    assert diff == sym("A3") * sym("A8") * (sym("x[0]") - 1) / g_poly(None, "x[0]")
    assert not check_invariance(invariant_I(), family_equation_printed()).invariant


def test_corrected_J_is_weight_homogeneous():
    weights = {"A1": 0, "A2": 1, "A3": 2, "A7": 2, "A8": 3, "A6": 4, "A5": 5}
    J = invariant_J(variant="corrected")
    t = sp.Symbol("t")
    Js = to_sympy(J)
    scaled = Js.subs({**{sp.Symbol(p): t**w * sp.Symbol(p) for p, w in weights.items()}, **{X(k): t * X(k) for k in (1, 0, -1, -2)}}, simultaneous=True)
    assert sp.expand(scaled - t**8 * Js) == 0


def test_invariants_are_reflection_symmetric():
    # x[k] -> x[-1-k] reverses the window
    rev = {"x[1]": sym("x[-2]"), "x[0]": sym("x[-1]"), "x[-1]": sym("x[0]"), "x[-2]": sym("x[1]")}
    for F in (invariant_I(), invariant_J(variant="corrected")):
        assert F.subs(rev) == F


def test_push_forward_shifts_window():
    F = parse("x[1] + 2*x[-2]")
    assert push_forward(F, parse("q")) == parse("q + 2*x[-1]")


def test_params_cover_family():
    assert PARAMS == ("A1", "A2", "A3", "A5", "A6", "A7", "A8")
    assert set(invariant_I().free_symbols()) - {"x[1]", "x[0]", "x[-1]", "x[-2]"} <= set(PARAMS)
