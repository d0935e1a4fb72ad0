"""The five canonical forms of the integrable family under x = a X + b.

The case is decided by the root structure of g(xi) = A1 xi^2 + A2 xi + A3.
Canonical parameters are read off by matching coefficients of the
transformed equation against the case template; the printed forward
parameter maps are then only consistency identities.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional

from .expr import ExprError, RationalExpr, const, parse, sym
from .expr.closedform import ClosedForm, parse_closed_form
from .family import PARAMS, WINDOW, family_equation, invariant_I, invariant_J
from .lagrangian import (
    ETA,
    X0,
    X1,
    X2,
    XI,
    XM1,
    XM2,
    DiscreteLagrangian,
    additive_form,
    reduce_modulo_square,
)

CASE_TAGS = {1: "TwoRealRoots", 2: "DoubleRoot", 3: "ComplexPair", 4: "Linear", 5: "Constant"}
CANONICAL_PARAMS = ("alpha", "beta", "gamma")
SQRT = "s"  # adjoined square root of the discriminant
SHIFTS = (X2, X1, X0, XM1, XM2)

_TEMPLATES = {
    1: "(x[1]^2-1)*x[2] + (x[-1]^2-1)*x[-2] + x[0]*(x[1]+x[-1])^2 + gamma*(x[1]+x[-1]) + (alpha*x[0]+beta)/(x[0]^2-1)",
    2: "x[1]^2*x[2] + x[-1]^2*x[-2] + x[0]*(x[1]+x[-1])^2 + gamma*(x[1]+x[-1]) + alpha/x[0]^2 + beta/x[0]",
    3: "(x[1]^2+1)*x[2] + (x[-1]^2+1)*x[-2] + x[0]*(x[1]+x[-1])^2 + gamma*(x[1]+x[-1]) + (alpha+beta*x[0])/(x[0]^2+1)",
    4: (
        "x[1]*x[2] + x[-1]*x[-2] + x[0]*(x[0]+2*x[1]+2*x[-1]) + (x[1]+x[-1])^2 - x[1]*x[-1]"
        " + gamma*(x[0]+x[1]+x[-1]) + alpha/x[0] + beta"
    ),
    5: "x[2] + x[-2] + gamma*(x[1]+x[-1]) + beta*x[0] + alpha",
}

_LAGRANGIANS_PRINTED = {
    1: (
        "(x[1]^2-1)*x[2]*x[0] + 1/2*x[0]^2*x[1]^2 + gamma*x[0]*x[1]"
        " + alpha/2*log(x[0]^2-1) + beta/2*log((x[0]-1)/(x[0]+1))"
    ),
    2: "x[1]^2*x[0]*x[2] + 1/2*x[0]^2*x[1]^2 + gamma*x[0]*x[1] - alpha/x[0] + beta*log(x[0])",
    3: (
        "(x[1]^2+1)*x[0]*x[2] + 1/2*x[0]^2*x[1]^2 + gamma*x[0]*x[1]"
        " + alpha/2*arctan(x[0]) + beta*log(x[0]^2+1)"
    ),
    4: (
        "x[0]*x[1]*x[2] + x[0]^2*x[1] + x[0]*x[1]^2 + x[0]^3/3"
        " + alpha*log(x[0]) + beta*x[0] + gamma*x[0]*(x[1]+x[0]/2)"
    ),
    5: "x[0]*x[2] + alpha*x[0] + beta/2*x[0]^2 + gamma*x[0]*x[1]",
}

# the case-3 potential whose Euler-Lagrange equation is the case-3 template
_LAGRANGIAN3_CORRECTED = (
    "(x[1]^2+1)*x[0]*x[2] + 1/2*x[0]^2*x[1]^2 + gamma*x[0]*x[1]"
    " + alpha*arctan(x[0]) + beta/2*log(x[0]^2+1)"
)

# nonzero brackets {x[i], x[j]} keyed by (i, j); the rest follow by skew-symmetry
_NUM = "2*x[0]*x[-1] + 2*x[0]*x[1] + 2*x[-2]*x[-1] + gamma"
_BRACKETS_PRINTED = {
    1: {(1, -1): "-1/(x[0]^2-1)", (1, -2): f"({_NUM})/(x[0]^2*x[-1]^2-x[0]^2-x[-1]^2+1)", (0, -2): "-1/(x[-1]^2-1)"},
    2: {(1, -1): "-1/x[0]^2", (1, -2): f"({_NUM})/(x[0]^2*x[-1]^2)", (0, -2): "-1/x[-1]^2"},
    3: {(1, -1): "-1/(x[0]^2+1)", (1, -2): f"({_NUM})/(x[0]^2*x[-1]^2+x[0]^2+x[1]^2+1)", (0, -2): "-1/(x[-1]^2+1)"},
    4: {(1, -1): "-1/x[0]", (1, -2): "(2*x[0]+2*x[-1]+x[-2]+x[1]+gamma)/(x[0]*x[-1])", (0, -2): "-1/x[-1]"},
    5: {(1, -1): "-1", (1, -2): "gamma", (0, -2): "-1"},
}
# case 3 with X[n-1]^2 in place of the printed X[n+1]^2 in the middle denominator
_BRACKET3_MIDDLE_CORRECTED = f"({_NUM})/(x[0]^2*x[-1]^2+x[0]^2+x[-1]^2+1)"

_J4 = (
    "-alpha*gamma*(x[0]+x[-1]) - beta*gamma*x[0]*x[-1] - gamma^2*x[0]*x[-1]*(x[0]+x[-1])"
    " + alpha*(x[0]^2+2*x[0]*x[-1]+x[0]*x[1]+x[-2]*x[-1]+x[-1]^2)"
    " + beta*x[0]*x[-1]*(x[0]+x[-2]+x[-1]+x[1])"
    " + gamma*x[0]*x[-1]*(x[0]*x[-2]+2*x[-2]*x[1]+x[-1]*x[1])"
    " + x[0]*x[-1]*(x[0]+x[-2]+x[-1]+x[1])*(x[0]^2+2*x[0]*x[-1]+x[0]*x[1]+x[-2]*x[-1]+x[-1]^2)"
)
_J5 = (
    "alpha*(x[0]+x[-2]+x[-1]+x[1]) - alpha*gamma*(x[0]+x[-1])"
    " - beta*gamma*x[0]*x[-1] + beta*(x[0]*x[-2]+x[-1]*x[1]) + 2*gamma*x[1]*x[-2]"
    " - gamma^2*(x[0]^2+x[-1]^2) + x[0]^2+x[-2]^2+x[-1]^2+x[1]^2"
)


def _scalar(v) -> RationalExpr:
    if isinstance(v, RationalExpr):
        return v
    if isinstance(v, str):
        return sym(v)
    return const(Fraction(v))


def _abg(alpha, beta, gamma) -> dict:
    vals = {}
    for name, v in zip(CANONICAL_PARAMS, (alpha, beta, gamma)):
        vals[name] = sym(name) if v is None else _scalar(v)
    return vals


def _check_case(case: int) -> int:
    if case not in CASE_TAGS:
        raise ValueError(f"case must be one of 1..5, got {case!r}")
    return case


def _with_params(text: str, vals: dict) -> RationalExpr:
    e = parse(text)
    return e.subs(vals)


def canonical_equation(case: int, alpha=None, beta=None, gamma=None) -> RationalExpr:
    """Left-hand side of the canonical equation; symbolic parameters by default."""
    return _with_params(_TEMPLATES[_check_case(case)], _abg(alpha, beta, gamma))


def identity_family_values(case: int, alpha=None, beta=None, gamma=None) -> dict:
    """Family parameters whose equation is exactly the canonical one (A8 = 0)."""
    v = _abg(alpha, beta, gamma)
    a, b, c = v["alpha"], v["beta"], v["gamma"]
    one, zero = const(1), const(0)
    g = {1: (one, zero, -one), 2: (one, zero, zero), 3: (one, zero, one), 4: (zero, one, zero), 5: (zero, zero, one)}
    A1, A2, A3 = g[_check_case(case)]
    A5, A6 = {1: (b, a - 1), 2: (a, b), 3: (a, b - 1), 4: (a, b), 5: (a, b - 1)}[case]
    return {"A1": A1, "A2": A2, "A3": A3, "A5": A5, "A6": A6, "A7": c, "A8": zero}


def printed_lagrangian(case: int, alpha=None, beta=None, gamma=None) -> ClosedForm:
    L = parse_closed_form(_LAGRANGIANS_PRINTED[_check_case(case)])
    return L.subs(_abg(alpha, beta, gamma))


def lagrangian_from_closed_form(L: ClosedForm) -> DiscreteLagrangian:
    """Split ``L = g(x1) x0 x2 + V(x1, x0)`` into the additive Lagrangian data."""
    d2 = L.diff_rational(X2)
    g1 = d2 / sym(X0)
    if {X0, X2} & g1.free_symbols():
        raise ExprError("Lagrangian is not of the form g(x1) x0 x2 + V(x1, x0)")
    V = (L - ClosedForm(d2 * sym(X2))).subs({X1: sym(XI), X0: sym(ETA)})
    if {X2, XM1, XM2} & V.free_symbols():
        raise ExprError("potential depends on more than (x1, x0)")
    return DiscreteLagrangian(g1.subs({X1: sym(XI)}), const(1), V.diff_rational(ETA), V.diff_rational(XI), V)


def canonical_lagrangian(case: int, alpha=None, beta=None, gamma=None) -> DiscreteLagrangian:
    """Lagrangian whose Euler-Lagrange equation is the canonical equation.

    For cases 1, 2, 4, 5 this is the printed one.  For case 3 the printed
    potential has the 1/2 factors on the wrong atoms; the corrected one is used.
    """
    text = _LAGRANGIAN3_CORRECTED if case == 3 else _LAGRANGIANS_PRINTED[_check_case(case)]
    return lagrangian_from_closed_form(parse_closed_form(text).subs(_abg(alpha, beta, gamma)))


def printed_brackets(case: int, alpha=None, beta=None, gamma=None, corrected: bool = True) -> dict:
    """Nonzero brackets ``{x[i], x[j]}`` keyed by ``(i, j)``.

    With ``corrected=True`` the case-3 middle bracket uses ``x[-1]^2`` in its
    denominator; ``corrected=False`` is the literal transcription.
    """
    vals = _abg(alpha, beta, gamma)
    table = dict(_BRACKETS_PRINTED[_check_case(case)])
    if case == 3 and corrected:
        table[(1, -2)] = _BRACKET3_MIDDLE_CORRECTED
    return {k: _with_params(v, vals) for k, v in table.items()}


def second_invariant(case: int, alpha=None, beta=None, gamma=None) -> RationalExpr:
    """J for cases 1-3 from the family; the separately found J4, J5 for cases 4, 5."""
    if _check_case(case) == 4:
        return _with_params(_J4, _abg(alpha, beta, gamma))
    if case == 5:
        return _with_params(_J5, _abg(alpha, beta, gamma))
    return invariant_J(identity_family_values(case, alpha, beta, gamma), variant="corrected")


@dataclass
class CanonicalModel:
    case: int
    params: dict
    equation: RationalExpr
    lagrangian: DiscreteLagrangian
    printed_lagrangian: ClosedForm
    brackets: dict
    invariants: tuple
    notes: list = field(default_factory=list)

    @property
    def tag(self) -> str:
        return CASE_TAGS[self.case]

    def as_dict(self) -> dict:
        return {
            "case": self.case,
            "tag": self.tag,
            "params": {k: str(v) for k, v in self.params.items()},
            "equation": str(self.equation),
            "lagrangian": str(self.lagrangian),
            "brackets": {f"{{x[{i}], x[{j}]}}": str(v) for (i, j), v in sorted(self.brackets.items(), reverse=True)},
            "invariants": [str(I) for I in self.invariants],
            "notes": list(self.notes),
        }


def canonical_model(case: int, alpha=None, beta=None, gamma=None) -> CanonicalModel:
    vals = _abg(alpha, beta, gamma)
    notes = []
    if case == 3:
        notes.append("Lagrangian potential uses alpha*arctan + beta/2*log (printed factors give a different equation)")
        notes.append("middle bracket denominator uses x[-1]^2 where x[1]^2 is printed")
    if case in (1, 2, 3):
        notes.append("second invariant is the corrected family J")
    return CanonicalModel(
        case=case,
        params=vals,
        equation=canonical_equation(case, **vals),
        lagrangian=canonical_lagrangian(case, **vals),
        printed_lagrangian=printed_lagrangian(case, **vals),
        brackets=printed_brackets(case, **vals),
        invariants=(invariant_I(identity_family_values(case, **vals)), second_invariant(case, **vals)),
        notes=notes,
    )


# classification ------------------------------------------------------------


@dataclass
class GClass:
    case: int
    a: RationalExpr  # x = a X + b
    b: RationalExpr
    sqrt_value: Optional[RationalExpr] = None  # s^2 when ``s`` appears in a, b
    roots: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def tag(self) -> str:
        return CASE_TAGS[self.case]


def _exact(v) -> Fraction:
    if isinstance(v, RationalExpr):
        if not v.is_constant():
            raise ValueError("classification needs numeric A1, A2, A3")
        return v.constant_value()
    return Fraction(v)


def _rational_sqrt(q: Fraction) -> Optional[Fraction]:
    from math import isqrt

    if q < 0:
        return None
    n, d = q.numerator, q.denominator
    rn, rd = isqrt(n), isqrt(d)
    return Fraction(rn, rd) if rn * rn == n and rd * rd == d else None


def classify_g(A1, A2, A3) -> GClass:
    """Case, root data and the transform ``x = a X + b`` to the canonical variable."""
    A1, A2, A3 = _exact(A1), _exact(A2), _exact(A3)
    if A1 == A2 == A3 == 0:
        raise ValueError("g vanishes identically")
    if A1 == 0:
        if A2 != 0:
            return GClass(4, const(1 / A2), const(-A3 / A2), roots={"x0": const(-A3 / A2)})
        return GClass(5, const(1), const(0), roots={})
    disc = A2 * A2 - 4 * A1 * A3
    centre = const(-A2 / (2 * A1))
    if disc == 0:
        return GClass(2, const(1), centre, roots={"x0": centre})
    root = _rational_sqrt(abs(disc))
    s = const(root) if root is not None else sym(SQRT)
    sq = None if root is not None else const(abs(disc))
    half = s * const(Fraction(1, 2 * abs(A1)))
    if disc > 0:
        cls = GClass(1, half, centre, sq, roots={"x1": centre - half, "x2": centre + half})
        cls.notes.append("roots ordered x1 < x2; the opposite order maps X to -X")
        return cls
    return GClass(3, half, centre, sq, roots={"mu": centre, "nu": half})


def _reduce(e: RationalExpr, sqrt_value) -> RationalExpr:
    return e if sqrt_value is None else reduce_modulo_square(e, SQRT, sqrt_value)


def apply_linear_transform(eq: RationalExpr, a, b, sqrt_value=None) -> RationalExpr:
    """Substitute ``x[k] = a X[k] + b`` (X written again as x[k]) and renormalize.

    The result is scaled so that the coefficient of ``x[2]`` has leading
    coefficient one, as in :func:`additive_form`; if ``a`` or ``b`` contain
    the adjoined root ``s`` pass ``sqrt_value = s^2``.
    """
    a, b = _scalar(a), _scalar(b)
    if a.is_zero():
        raise ValueError("a = 0 is not an admissible transformation")
    mp = {v: a * sym(v) + b for v in SHIFTS if v in eq.free_symbols()}
    out = _reduce(eq.subs(mp), sqrt_value)
    if sqrt_value is None:
        return additive_form(out).as_expression()
    return out


def _monomials(e: RationalExpr, variables) -> dict:
    terms = {(): e}
    for v in variables:
        nxt = {}
        for key, c in terms.items():
            cs = c.coefficients_in(v) if v in c.free_symbols() else [c]
            for k, ck in enumerate(cs):
                if not ck.is_zero():
                    nxt[key + (k,)] = ck
        terms = nxt
    return terms


@dataclass
class CanonicalCase:
    case: int
    alpha: RationalExpr
    beta: RationalExpr
    gamma: RationalExpr
    a: RationalExpr
    b: RationalExpr
    sqrt_value: Optional[RationalExpr] = None
    roots: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def tag(self) -> str:
        return CASE_TAGS[self.case]

    @property
    def params(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "gamma": self.gamma}

    def as_dict(self) -> dict:
        return {
            "case": self.case,
            "tag": self.tag,
            "transform": {"a": str(self.a), "b": str(self.b)},
            "sqrt": None if self.sqrt_value is None else {"symbol": SQRT, "square": str(self.sqrt_value)},
            "roots": {k: str(v) for k, v in self.roots.items()},
            "alpha": str(self.alpha),
            "beta": str(self.beta),
            "gamma": str(self.gamma),
            "canonical_equation": str(canonical_equation(self.case, self.alpha, self.beta, self.gamma)),
            "notes": list(self.notes),
        }


def match_template(case: int, transformed: RationalExpr, sqrt_value=None) -> dict:
    """Read (alpha, beta, gamma) from an equation already in canonical variables."""
    template = canonical_equation(case)
    lead_t = transformed.diff(X2)
    lead_c = template.diff(X2)
    scale = _reduce(lead_t / lead_c, sqrt_value)
    if scale.free_symbols() & set(SHIFTS):
        raise ExprError(f"transformed equation does not have the case-{case} leading term")
    T = _reduce(transformed / scale, sqrt_value)
    zero = {p: const(0) for p in CANONICAL_PARAMS}
    E0 = template.subs(zero)
    den = template.denominator()
    xs = [v for v in SHIFTS]
    rest = _monomials(_reduce((T - E0) * den, sqrt_value), xs)
    bases = {}
    for p in CANONICAL_PARAMS:
        unit = dict(zero)
        unit[p] = const(1)
        bases[p] = _monomials((template.subs(unit) - E0) * den, xs)
    found = {}
    for p in CANONICAL_PARAMS:
        others = set().union(*(bases[q].keys() for q in CANONICAL_PARAMS if q != p))
        key = next(k for k in bases[p] if k not in others)
        found[p] = _reduce(rest.get(key, const(0)) / bases[p][key], sqrt_value)
    residual = _reduce(T - canonical_equation(case, **found), sqrt_value)
    if not residual.is_zero():
        raise ExprError(f"template match failed for case {case}: residual {residual}")
    return found


def to_canonical(values: Mapping, equation: Optional[RationalExpr] = None) -> tuple:
    """Classify family parameters and read the canonical parameters.

    Returns ``(CanonicalCase, CanonicalModel)``.  ``equation`` defaults to the
    family Euler-Lagrange equation for ``values``.
    """
    vals = {k: _scalar(values.get(k, 0)) for k in PARAMS}
    cls = classify_g(vals["A1"], vals["A2"], vals["A3"])
    eq = family_equation(vals) if equation is None else equation
    moved = apply_linear_transform(eq, cls.a, cls.b, cls.sqrt_value)
    found = match_template(cls.case, moved, cls.sqrt_value)
    cc = CanonicalCase(cls.case, found["alpha"], found["beta"], found["gamma"], cls.a, cls.b, cls.sqrt_value, cls.roots, list(cls.notes))
    model = canonical_model(cls.case, **found) if cls.sqrt_value is None else None
    return cc, model


# printed parameter maps, used only as consistency identities ---------------


def printed_parameter_map(case: int, alpha, beta, gamma, A8=0, reading: str = "literal", **data) -> dict:
    """Family parameters from canonical ones through the printed relations.

    ``data`` carries the root data: ``kappa, x1, x2`` (case 1, x1 < x2),
    ``kappa, x0`` (case 2), ``kappa, mu, nu`` (case 3), ``mu, nu`` (case 4),
    ``kappa`` (case 5).

    The case-1 relations as printed disagree with coefficient matching.
    ``reading="consistent"`` feeds them ``(gamma, alpha, -beta)`` in the
    three parameter slots and the smaller root where ``x2`` appears (keeping
    ``delta = x2 - x1``); read that way they agree exactly.
    """
    al, be, ga, A8 = (_scalar(v) for v in (alpha, beta, gamma, A8))
    d = {k: _scalar(v) for k, v in data.items()}
    if reading not in ("literal", "consistent"):
        raise ValueError(f"unknown reading {reading!r}")
    if case == 1:
        k, r1, r2 = d["kappa"], d["x1"], d["x2"]
        de = r2 - r1
        x2 = r2
        if reading == "consistent":
            al, be, ga = ga, al, -be
            x2 = r1
        A5 = -(
            (
                (be + ga) * de ** 5 / 32
                + (al + be / 4 + 2) * x2 * de ** 4 / 4
                + (al + 6) * 3 * x2 ** 2 * de ** 3 / 4
                + (al + 26) * x2 ** 3 * de ** 2 / 2
                + 15 * x2 ** 4 * de
                + 6 * x2 ** 5
            )
            * k
            + A8 * x2 * (de + x2)
        ) * k
        A6 = 2 * k * (
            (
                (al / 8 + be / 32 + const(Fraction(1, 4))) * de ** 4
                + x2 / 2 * (al + 6) * de ** 3
                + x2 ** 2 / 2 * (al + 21) * de ** 2
                + 15 * de * x2 ** 3
                + 15 * x2 ** 4 / 2
            )
            * k
            + A8 * (x2 + de / 2)
        )
        A7 = k / 4 * (al + 6) * de ** 2 + 6 * k * de * x2 + 6 * k * x2 ** 2
        g = (k, -k * (r1 + r2), k * r1 * r2)
    elif case == 2:
        k, x0 = d["kappa"], d["x0"]
        A5 = k * (al * k - 6 * k * x0 ** 5 - 2 * ga * k * x0 ** 3 - be * k * x0 - A8 * x0 ** 2)
        A6 = k * (15 * k * x0 ** 4 + 4 * ga * k * x0 ** 2 + be * k + 2 * A8 * x0)
        A7 = k * (6 * x0 ** 2 + ga)
        g = (k, -2 * k * x0, k * x0 ** 2)
    elif case == 3:
        k, mu, nu = d["kappa"], d["mu"], d["nu"]
        A5 = k ** 2 * (al * nu ** 5 - nu ** 4 * (be * mu + 2 * mu + 2 * ga * mu) - 2 * mu ** 3 * nu ** 2 * (ga + 4) - 6 * mu ** 5) - k * A8 * (mu ** 2 + nu ** 2)
        A6 = k * (be * k * nu ** 4 + 4 * ga * k * mu ** 2 * nu ** 2 + 15 * k * mu ** 4 + 6 * k * mu ** 2 * nu ** 2 - k * nu ** 4 + 2 * A8 * mu)
        A7 = k * (ga * nu ** 2 + 6 * mu ** 2)
        g = (k, -2 * k * mu, k * (mu ** 2 + nu ** 2))
    elif case == 4:
        mu, nu = d["mu"], d["nu"]
        A6 = 4 * ga * nu - A8 * mu + 15 * nu ** 2 + be
        A5 = (nu ** 3 - (6 * nu + ga) * nu ** 2 + A6 * nu + al) / mu
        A7 = 6 * nu + ga
        g = (const(0), mu, nu)
    elif case == 5:
        k = d["kappa"]
        A5 = k * (al * k - A8)
        A6 = k ** 2 * (be - 1)
        A7 = k * ga
        g = (const(0), const(0), k)
    else:
        raise ValueError(f"case must be one of 1..5, got {case!r}")
    return {"A1": g[0], "A2": g[1], "A3": g[2], "A5": A5, "A6": A6, "A7": A7, "A8": A8}


# complex equivalence of cases 3 and 1 -----------------------------------------

IMAG = "i"


def case3_complex_residual(gamma_sign: int = -1) -> RationalExpr:
    """Residual of mapping case 3 to case 1 by ``X -> i X``, ``(alpha, beta, gamma) -> (i beta, alpha, -gamma)``.

    Arithmetic is over the Gaussian rationals (``i^2 = -1``).  The transformed
    case-3 equation is multiplied by ``i`` before comparison, since an equation
    is only defined up to a nonzero factor.  ``gamma_sign=+1`` is a deliberate
    mutation.
    """
    i = sym(IMAG)
    a1, b1, c1 = (sym(p) for p in CANONICAL_PARAMS)
    can3 = canonical_equation(3, i * b1, a1, gamma_sign * c1)
    moved = can3.subs({v: i * sym(v) for v in SHIFTS})
    moved = reduce_modulo_square(moved * i, IMAG, const(-1))
    return reduce_modulo_square(moved - canonical_equation(1), IMAG, const(-1))


def case3_complex_equivalence_check() -> bool:
    return case3_complex_residual().is_zero()
