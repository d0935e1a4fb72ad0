"""Decide whether an additive fourth-order equation comes from a Lagrangian.

The equations handled here have the form ``x[2] = f(x[1], x[0], x[-1]) x[-2] + h``.
A positive answer is a Lagrangian

    L_n = lambda^(-n) * [ g(x[1]) x[0] x[2] + V(x[1], x[0]) ]

whose Euler-Lagrange equation reproduces the input up to a nonzero factor.
Negative answers name the failing step and carry a witness expression.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .expr import ExprError, RationalExpr, const, parse, sym
from .expr.closedform import ClosedForm, integrate, sqrt_expr

X2, X1, X0, XM1, XM2 = "x[2]", "x[1]", "x[0]", "x[-1]", "x[-2]"
XI, ETA = "xi", "eta"
LAMBDA = "lambda"
ANCHORS = (Fraction(0), Fraction(1), Fraction(-1), Fraction(2), Fraction(1, 2))

STEP_NAMES = {
    1: "clear denominators",
    2: "factor A and B",
    3: "form remainder R",
    4: "mixed partial of R",
    5: "split R into M and N",
    6: "closure of M and N",
    7: "reconstruct V",
}


class NotAdditive(ValueError):
    pass


@dataclass(frozen=True)
class RawAdditiveEquation:
    """Cleared form ``A x[2] + B x[-2] + C = 0`` with polynomial A, B, C."""

    A: RationalExpr
    B: RationalExpr
    C: RationalExpr

    @property
    def f(self) -> RationalExpr:
        return -self.B / self.A

    @property
    def h(self) -> RationalExpr:
        return -self.C / self.A

    def as_expression(self) -> RationalExpr:
        return self.A * sym(X2) + self.B * sym(XM2) + self.C

    def parameters(self) -> set:
        out = set()
        for e in (self.A, self.B, self.C):
            out |= e.free_symbols()
        return {s for s in out if not s.startswith("x[")}


def _poly_gcd(a: RationalExpr, b: RationalExpr) -> RationalExpr:
    if a.is_zero():
        return b
    if b.is_zero():
        return a
    n, _, m, _ = _same_ctx(a.num, a.den, b.num, b.den)
    return RationalExpr.from_poly(n.gcd(m))


def _same_ctx(*polys):
    from .expr.core import _unify

    return _unify(*polys)


def _normalize_triple(A, B, C):
    g = _poly_gcd(_poly_gcd(A, B), C)
    if not _is_one(g):
        A, B, C = A / g, B / g, C / g
    lc = A.num.leading_coefficient()
    if lc != 1:
        k = const(Fraction(int(lc.q), int(lc.p)))
        A, B, C = A * k, B * k, C * k
    return A, B, C


def _is_one(e: RationalExpr) -> bool:
    return e.is_constant() and e.constant_value() == 1


def clear_denominators(f: RationalExpr, h: RationalExpr) -> RawAdditiveEquation:
    """Clear denominators of ``x[2] = f x[-2] + h``."""
    for e, name in ((f, "f"), (h, "h")):
        bad = e.free_symbols() & {X2, XM2}
        if bad:
            raise NotAdditive(f"{name} depends on {sorted(bad)}")
    if f.is_zero():
        raise NotAdditive("f vanishes identically; the map is not invertible")
    df, dh = f.denominator(), h.denominator()
    lcm = df * dh / _poly_gcd(df, dh)
    A = lcm
    B = -lcm * f
    C = -lcm * h
    A, B, C = _normalize_triple(A, B, C)
    return RawAdditiveEquation(A, B, C)


def additive_form(E: RationalExpr) -> RawAdditiveEquation:
    """Read ``A x[2] + B x[-2] + C`` off an equation ``E = 0``.

    Only the denominators of A and B are cleared; C may stay rational.
    """
    for v in (X2, XM2):
        if v not in E.free_symbols():
            raise NotAdditive("equation does not involve both x[2] and x[-2]")
    A = E.diff(X2)
    B = E.diff(XM2)
    C = E - A * sym(X2) - B * sym(XM2)
    for name, part in (("x[2]", A), ("x[-2]", B)):
        bad = part.free_symbols() & {X2, XM2}
        if bad:
            raise NotAdditive(f"coefficient of {name} depends on {sorted(bad)}")
    if C.free_symbols() & {X2, XM2}:
        raise NotAdditive("equation is not affine in x[2] and x[-2]")
    if A.is_zero() or B.is_zero():
        raise NotAdditive("equation is not invertible")
    da, db = A.denominator(), B.denominator()
    lcm = da * db / _poly_gcd(da, db)
    A, B, C = A * lcm, B * lcm, C * lcm
    lc = A.num.leading_coefficient()
    k = const(Fraction(int(lc.q), int(lc.p)))
    return RawAdditiveEquation(A * k, B * k, C * k)


@dataclass
class StructuredEquation:
    """``K(x0) [ g(x1) x2 + lam2 g(x-1) x-2 ] + C = 0`` with g stored in ``xi``."""

    raw: RawAdditiveEquation
    K: RationalExpr
    g: RationalExpr
    lam2: RationalExpr
    R: RationalExpr  # with formal lambda
    M: Optional[RationalExpr] = None
    N: Optional[RationalExpr] = None
    lam: Optional[RationalExpr] = None

    def g_at(self, var: str) -> RationalExpr:
        return self.g.subs({XI: sym(var)})


@dataclass
class DiscreteLagrangian:
    """``L_n = lam^(-n) [ g(x1) x0 x2 + V(x1, x0) ]``.

    ``V_eta`` and ``V_xi`` are the partial derivatives of ``V(xi, eta)``;
    ``V`` is a closed form when one was found.
    """

    g: RationalExpr
    lam: RationalExpr
    V_eta: RationalExpr
    V_xi: RationalExpr
    V: Optional[ClosedForm] = None
    lam2: Optional[RationalExpr] = None

    def g_at(self, var: str) -> RationalExpr:
        return self.g.subs({XI: sym(var)})

    def V_at(self, a: str, b: str) -> ClosedForm:
        if self.V is None:
            raise ExprError("no closed form for V")
        return self.V.subs({XI: sym(a), ETA: sym(b)})

    def expression(self) -> ClosedForm:
        """``g(x1) x0 x2 + V(x1, x0)`` without the lambda weight."""
        return ClosedForm(self.g_at(X1) * sym(X0) * sym(X2)) + self.V_at(X1, X0)

    def partials(self):
        """Partial derivatives of the bracket in ``L`` w.r.t. (x2, x1, x0)."""
        g1 = self.g_at(X1)
        d2 = g1 * sym(X0)
        d1 = g1.diff(X1) * sym(X0) * sym(X2) + self.V_xi.subs({XI: sym(X1), ETA: sym(X0)})
        d0 = g1 * sym(X2) + self.V_eta.subs({XI: sym(X1), ETA: sym(X0)})
        return d2, d1, d0

    def euler_lagrange(self) -> RationalExpr:
        return euler_lagrange_from_partials(*self.partials(), self.lam, self.lam2)

    def __str__(self):
        lam = str(self.lam)
        weight = "" if lam == "1" else f"({lam})^(-n) * "
        if self.V is not None:
            return f"L_n = {weight}[{self.expression()}]"
        return f"L_n = {weight}[({self.g_at(X1)})*x[0]*x[2] + V(x[1], x[0])]"


def reduce_modulo_square(e: RationalExpr, var: str, value: RationalExpr) -> RationalExpr:
    """Reduce ``e`` in the extension where ``var^2 = value`` to the form ``(a + b var) / c``."""
    if var not in e.free_symbols():
        return e
    v = sym(var)
    parts = []
    for part in (e.numerator(), e.denominator()):
        if var not in part.free_symbols():
            parts.append(part)
            continue
        even, odd = const(0), const(0)
        for k, c in enumerate(part.coefficients_in(var)):
            term = c * value ** (k // 2)
            if k % 2:
                odd = odd + term
            else:
                even = even + term
        parts.append(even + odd * v)
    num, den = parts
    if var in den.free_symbols():
        # (a + b v)^-1 = (a - b v) / (a^2 - b^2 value)
        a, b = den.coefficients_in(var)
        return reduce_modulo_square(num * (a - b * v), var, value) / (a * a - b * b * value)
    return num / den


def _reduce_lambda(e: RationalExpr, lam2: Optional[RationalExpr]) -> RationalExpr:
    """Reduce powers of the formal ``lambda`` modulo ``lambda^2 - lam2``."""
    if lam2 is None:
        return e
    return reduce_modulo_square(e, LAMBDA, lam2)


def euler_lagrange_from_partials(d2, d1, d0, lam, lam2=None) -> RationalExpr:
    """Combine ``dL/dx2, dL/dx1, dL/dx0`` (functions of x2, x1, x0) into the EL equation.

    The weight ``lam^(-n)`` contributes ``lam^l`` to the term shifted back by ``l``.
    """
    lam = lam if isinstance(lam, RationalExpr) else const(lam)
    E = d0 + lam * d1.shift(-1) + lam * lam * d2.shift(-2)
    return _reduce_lambda(E, lam2)


def euler_lagrange_expr(L, lam=1) -> RationalExpr:
    """EL equation of ``lam^(-n) L(x2, x1, x0)`` for an expression ``L``."""
    L = ClosedForm.lift(L)
    d2 = L.diff_rational(X2)
    d1 = L.diff_rational(X1)
    d0 = L.diff_rational(X0)
    return euler_lagrange_from_partials(d2, d1, d0, lam)


def equation_key(E: RationalExpr):
    """Canonical representative of the equation ``E = 0`` up to a constant factor."""
    n = E.numerator()
    lc = n.num.leading_coefficient()
    return n * const(Fraction(int(lc.q), int(lc.p)))


def euler_lagrange(L: DiscreteLagrangian) -> RationalExpr:
    return L.euler_lagrange()


# the test ------------------------------------------------------------------


@dataclass
class StepResult:
    step: int
    passed: bool
    detail: str = ""
    witness: Optional[RationalExpr] = None

    @property
    def name(self) -> str:
        return STEP_NAMES[self.step]

    def as_dict(self) -> dict:
        d = {"step": self.step, "name": self.name, "passed": self.passed, "detail": self.detail}
        if self.witness is not None:
            d["witness"] = str(self.witness)
        return d


@dataclass
class LambdaBranch:
    lam: RationalExpr
    steps: list = field(default_factory=list)
    lagrangian: Optional[DiscreteLagrangian] = None

    @property
    def passed(self) -> bool:
        return self.lagrangian is not None


@dataclass
class TestReport:
    verdict: str
    steps: list
    raw: Optional[RawAdditiveEquation] = None
    structured: Optional[StructuredEquation] = None
    branches: list = field(default_factory=list)
    reason: str = ""

    @property
    def failing_step(self) -> Optional[int]:
        for s in self.steps:
            if not s.passed:
                return s.step
        return None

    @property
    def witness(self) -> Optional[RationalExpr]:
        for s in self.steps:
            if not s.passed:
                return s.witness
        return None

    @property
    def lagrangian(self) -> Optional[DiscreteLagrangian]:
        for b in self.branches:
            if b.passed:
                return b.lagrangian
        return None

    @property
    def lambdas(self) -> list:
        return [b.lam for b in self.branches if b.passed]

    def as_dict(self) -> dict:
        out = {
            "verdict": self.verdict,
            "failing_step": self.failing_step,
            "steps": [s.as_dict() for s in self.steps],
            "reason": self.reason,
        }
        if self.raw is not None:
            out["A"], out["B"], out["C"] = str(self.raw.A), str(self.raw.B), str(self.raw.C)
        if self.structured is not None:
            s = self.structured
            out["K"] = str(s.K)
            out["g"] = str(s.g)
            out["lambda_squared"] = str(s.lam2)
        out["branches"] = []
        for b in self.branches:
            bd = {"lambda": str(b.lam), "passed": b.passed, "steps": [s.as_dict() for s in b.steps]}
            if b.lagrangian is not None:
                L = b.lagrangian
                bd["M"] = str(L.V_eta)
                bd["N_over_lambda"] = str(L.V_xi)
                bd["V"] = None if L.V is None else str(L.V)
                bd["lagrangian"] = str(L)
            out["branches"].append(bd)
        return out


def factor_shift_split(raw: RawAdditiveEquation):
    """Write ``A = K g(x1)`` and ``B = lam2 K g(x-1)``.

    ``K`` is the common polynomial factor of A and B with parameter-only
    content moved into ``g``.  Returns ``(K, g(xi), lam2)`` or raises
    ``ValueError`` with the reason.
    """
    A, B = raw.A, raw.B
    if not (A.is_polynomial() and B.is_polynomial()):
        raise ValueError("A and B must be polynomials")
    common = _poly_gcd(A, B)
    c0, facs = common.num.factor()
    K = const(1)
    for fac, m in facs:
        fe = RationalExpr.from_poly(fac)
        if any(s.startswith("x[") for s in fe.free_symbols()):
            K = K * fe ** int(m)
    lc = K.num.leading_coefficient()
    K = K * const(Fraction(int(lc.q), int(lc.p)))
    g1 = A / K
    extra = {s for s in g1.free_symbols() if s.startswith("x[")} - {X1}
    if extra or not g1.is_polynomial():
        raise ValueError(f"A/K = {g1} is not a polynomial in x[1] alone")
    g = g1.subs({X1: sym(XI)})
    gm1 = g.subs({XI: sym(XM1)})
    ratio = B / (K * gm1)
    if any(s.startswith("x[") for s in ratio.free_symbols()):
        raise ValueError(f"B/(K g(x[-1])) = {ratio} is not constant")
    return K, g, ratio


def _lambda_candidates(lam2: RationalExpr):
    """Branches ``(lam, modulus)``: explicit roots, or formal lambda with lambda^2 = lam2."""
    if LAMBDA in lam2.free_symbols():
        raise ValueError("lambda^2 depends on lambda")
    r = sqrt_expr(lam2)
    if r is not None:
        if r.is_constant() and r.constant_value() < 0:
            r = -r
        if r.is_zero():
            return []
        return [(r, None), (-r, None)]
    return [(sym(LAMBDA), lam2)]


def split_MN(R: RationalExpr):
    """Split ``R(x1, x0, x-1) = M(x1, x0) + N(x0, x-1)`` with symmetric halves.

    Returns ``(M(xi, eta), N(xi, eta))`` where N's first argument is x[0].
    """
    den = R.denominator()
    for c in ANCHORS:
        cc = const(c)
        try:
            if den.subs({X1: cc, XM1: cc}).is_zero():
                continue
            S = R.subs({X1: cc, XM1: cc})
            M = R.subs({XM1: cc}) - S / 2
            N = R.subs({X1: cc}) - S / 2
        except ZeroDivisionError:
            continue
        Mp = M.subs({X1: sym(XI), X0: sym(ETA)})
        Np = N.subs({X0: sym(XI), XM1: sym(ETA)})
        return Mp, Np
    raise ValueError("no admissible anchor value for the split")


def reconstruct_V(M: RationalExpr, Vxi: RationalExpr) -> Optional[ClosedForm]:
    """Find ``V(xi, eta)`` with ``dV/deta = M`` and ``dV/dxi = Vxi`` in closed form."""
    part = integrate(M, ETA)
    if part is None:
        return None
    try:
        dpart = part.diff_rational(XI)
    except ExprError:
        return None
    phi_prime = Vxi - dpart
    if ETA in phi_prime.free_symbols():
        return None
    phi = integrate(phi_prime, XI)
    if phi is None:
        return None
    V = part + phi
    if V.diff(ETA) != ClosedForm(M) or V.diff(XI) != ClosedForm(Vxi):
        return None
    return V


def _branch(struct: StructuredEquation, lam: RationalExpr, lam2mod) -> LambdaBranch:
    br = LambdaBranch(lam)
    R = struct.R
    if lam2mod is None:
        R = R.subs({LAMBDA: lam})
    W = _reduce_lambda(R.diff(X1).diff(XM1), lam2mod)
    if not W.is_zero():
        formal = struct.R.diff(X1).diff(XM1)
        br.steps.append(StepResult(4, False, f"mixed partial does not vanish at lambda = {lam}", formal))
        return br
    br.steps.append(StepResult(4, True, "mixed partial vanishes"))
    try:
        M, N = split_MN(R)
    except ValueError as exc:
        br.steps.append(StepResult(5, False, str(exc)))
        return br
    check = M.subs({XI: sym(X1), ETA: sym(X0)}) + N.subs({XI: sym(X0), ETA: sym(XM1)}) - R
    if not _reduce_lambda(check, lam2mod).is_zero():
        br.steps.append(StepResult(5, False, "R is not a sum M(x1,x0) + N(x0,x-1)", check))
        return br
    br.steps.append(StepResult(5, True, f"M = {M}; N = {N}"))
    closure = _reduce_lambda(lam * M.diff(XI) - N.diff(ETA), lam2mod)
    if not closure.is_zero():
        formal = sym(LAMBDA) * M.diff(XI) - N.diff(ETA)
        br.steps.append(StepResult(6, False, f"closure condition fails at lambda = {lam}", formal))
        return br
    br.steps.append(StepResult(6, True, "closure holds"))
    Vxi = _reduce_lambda(N / lam, lam2mod)
    V = reconstruct_V(M, Vxi)
    if V is None:
        br.steps.append(StepResult(7, True, "gradient of V is consistent; no closed form found"))
    else:
        br.steps.append(StepResult(7, True, f"V = {V}"))
    br.lagrangian = DiscreteLagrangian(struct.g, lam, M, Vxi, V, lam2mod)
    return br


def variational_test(eq) -> TestReport:
    """Run the seven-step test on an equation.

    ``eq`` may be a :class:`RawAdditiveEquation`, a pair ``(f, h)`` of
    expressions or strings, or a single expression ``E`` meaning ``E = 0``.
    """
    steps = []
    try:
        raw = _as_raw(eq)
    except NotAdditive as exc:
        steps.append(StepResult(1, False, str(exc)))
        return TestReport("not-additive", steps, reason=str(exc))
    steps.append(StepResult(1, True, f"A = {raw.A}; B = {raw.B}; C = {raw.C}"))
    try:
        K, g, lam2 = factor_shift_split(raw)
    except ValueError as exc:
        steps.append(StepResult(2, False, str(exc)))
        return TestReport("not-variational", steps, raw=raw, reason=str(exc))
    if lam2.is_constant() and lam2.constant_value() <= 0:
        steps.append(StepResult(2, False, f"lambda^2 = {lam2} is not positive", lam2))
        return TestReport("not-variational", steps, raw=raw, reason="lambda^2 must be positive")
    steps.append(StepResult(2, True, f"K = {K}; g(xi) = {g}; lambda^2 = {lam2}"))
    gp0 = g.diff(XI).subs({XI: sym(X0)})
    R = raw.C / K - sym(LAMBDA) * gp0 * sym(X1) * sym(XM1)
    steps.append(StepResult(3, True, f"R = {R}"))
    struct = StructuredEquation(raw, K, g, lam2, R)
    branches = [_branch(struct, lam, mod) for lam, mod in _lambda_candidates(lam2)]
    report = TestReport("not-variational", steps, raw=raw, structured=struct, branches=branches)
    good = [b for b in branches if b.passed]
    if good:
        report.verdict = "variational"
        steps.extend(good[0].steps)
        struct.lam = good[0].lam
        struct.M = good[0].lagrangian.V_eta
        struct.N = good[0].lagrangian.V_xi * good[0].lam
    else:
        # report the branch that got furthest; ties keep the first (positive root)
        best = max(branches, key=lambda b: b.steps[-1].step) if branches else None
        if best is not None:
            steps.extend(best.steps)
            report.reason = best.steps[-1].detail
    return report


def _as_raw(eq) -> RawAdditiveEquation:
    if isinstance(eq, RawAdditiveEquation):
        return eq
    if isinstance(eq, tuple) and len(eq) == 2:
        f, h = (parse(s) if isinstance(s, str) else s for s in eq)
        return clear_denominators(f, h)
    if isinstance(eq, str):
        if ";" in eq:
            f, h = eq.split(";")
            return clear_denominators(parse(f), parse(h))
        eq = parse_equation(eq)
    if isinstance(eq, RationalExpr):
        return additive_form(eq)
    raise TypeError("unsupported equation input")


def parse_equation(text: str, params=None) -> RationalExpr:
    """Parse ``lhs = rhs`` (or a bare expression meaning ``expr = 0``)."""
    if text.count("=") > 1:
        raise ExprError("more than one '=' in equation")
    if "=" in text:
        lhs, rhs = text.split("=")
        return parse(lhs, params) - parse(rhs, params)
    return parse(text, params)
