"""Closed forms: rational functions plus log / arctan / arctanh atoms.

The integrator handles rational integrands whose denominator, viewed as a
polynomial in the integration variable, splits into linear factors and
simple irreducible quadratics over the coefficient field.  Pairs of
logarithms with opposite coefficients are merged into ``arctanh``.
Anything else returns ``None`` rather than an unverified answer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import ExprError, RationalExpr, const, poly_coefficients
from .printing import to_string

_FUNCS = ("log", "arctan", "arctanh")


@dataclass(frozen=True)
class Atom:
    kind: str
    arg: RationalExpr

    def derivative(self, var: str) -> RationalExpr:
        da = self.arg.diff(var)
        if da.is_zero():
            return da
        if self.kind == "log":
            return da / self.arg
        if self.kind == "arctan":
            return da / (1 + self.arg * self.arg)
        return da / (1 - self.arg * self.arg)

    def value(self, point) -> float:
        from .numeric import evaluate_float

        a = evaluate_float(self.arg, point)
        if self.kind == "log":
            return math.log(abs(a))
        if self.kind == "arctan":
            return math.atan(a)
        # real branch of the antiderivative of 1/(1 - a^2)
        return 0.5 * math.log(abs((1 + a) / (1 - a)))


class ClosedForm:
    """``rational + sum(coeff_i * atom_i)``."""

    __slots__ = ("rational", "atoms")

    def __init__(self, rational: RationalExpr | None = None, atoms=()):
        self.rational = rational if rational is not None else const(0)
        merged: dict = {}
        order = []
        for c, a in atoms:
            if a not in merged:
                merged[a] = c
                order.append(a)
            else:
                merged[a] = merged[a] + c
        self.atoms = tuple((merged[a], a) for a in order if not merged[a].is_zero())

    @staticmethod
    def lift(e) -> "ClosedForm":
        if isinstance(e, ClosedForm):
            return e
        if isinstance(e, RationalExpr):
            return ClosedForm(e)
        return ClosedForm(const(e))

    def is_rational(self) -> bool:
        return not self.atoms

    def __add__(self, other):
        o = ClosedForm.lift(other)
        return ClosedForm(self.rational + o.rational, self.atoms + o.atoms)

    __radd__ = __add__

    def __neg__(self):
        return ClosedForm(-self.rational, tuple((-c, a) for c, a in self.atoms))

    def __sub__(self, other):
        return self + (-ClosedForm.lift(other))

    def scale(self, k) -> "ClosedForm":
        k = k if isinstance(k, RationalExpr) else const(k)
        return ClosedForm(self.rational * k, tuple((c * k, a) for c, a in self.atoms))

    def __mul__(self, k):
        if isinstance(k, ClosedForm):
            if k.is_rational():
                return self.scale(k.rational)
            if self.is_rational():
                return k.scale(self.rational)
            raise ExprError("product of two transcendental closed forms")
        return self.scale(k)

    __rmul__ = __mul__

    def diff(self, var: str) -> "ClosedForm":
        rat = self.rational.diff(var)
        atoms = []
        for c, a in self.atoms:
            dc = c.diff(var)
            if not dc.is_zero():
                atoms.append((dc, a))
            rat = rat + c * a.derivative(var)
        return ClosedForm(rat, atoms)

    def diff_rational(self, var: str) -> RationalExpr:
        """Derivative in ``var``; raises if it is not a rational function."""
        d = self.diff(var)
        if not d.is_rational():
            raise ExprError(f"derivative in {var} is not rational")
        return d.rational

    def subs(self, mapping) -> "ClosedForm":
        return ClosedForm(
            self.rational.subs(mapping),
            tuple((c.subs(mapping), Atom(a.kind, a.arg.subs(mapping))) for c, a in self.atoms),
        )

    def shift(self, k: int) -> "ClosedForm":
        return ClosedForm(self.rational.shift(k), tuple((c.shift(k), Atom(a.kind, a.arg.shift(k))) for c, a in self.atoms))

    def free_symbols(self) -> set:
        out = set(self.rational.free_symbols())
        for c, a in self.atoms:
            out |= c.free_symbols() | a.arg.free_symbols()
        return out

    def evaluate_float(self, point) -> float:
        from .numeric import evaluate_float

        v = evaluate_float(self.rational, point) if not self.rational.is_zero() else 0.0
        for c, a in self.atoms:
            v += evaluate_float(c, point) * a.value(point)
        return v

    def __eq__(self, other):
        if not isinstance(other, ClosedForm):
            other = ClosedForm.lift(other)
        if self.rational != other.rational:
            return False
        return dict((a, c) for c, a in self.atoms) == dict((a, c) for c, a in other.atoms)

    def __hash__(self):
        return hash((self.rational, frozenset((a, c) for c, a in self.atoms)))

    def __str__(self):
        parts = []
        if not self.rational.is_zero() or not self.atoms:
            parts.append(to_string(self.rational))
        for c, a in self.atoms:
            cs = to_string(c)
            if len(c.num) > 1 or not c.den.is_one():
                cs = f"({cs})"
            term = f"{a.kind}({to_string(a.arg)})"
            if c == 1:
                parts.append(term)
            elif c == -1:
                parts.append(f"-{term}")
            else:
                parts.append(f"{cs}*{term}")
        out = parts[0]
        for p in parts[1:]:
            out += f" - {p[1:]}" if p.startswith("-") else f" + {p}"
        return out

    __repr__ = __str__


def parse_closed_form(text: str, params=None) -> ClosedForm:
    """Parse text that may contain ``log``, ``arctan`` and ``arctanh`` calls."""
    from .parser import parse

    holders: dict = {}
    counter = [0]

    def hook(kind):
        def f(arg):
            counter[0] += 1
            name = f"__atom{counter[0]}"
            holders[name] = Atom(kind, arg)
            from .core import sym

            return sym(name)

        return f

    funcs = {k: hook(k) for k in _FUNCS}
    e = parse(text, params=params, functions=funcs)
    if not holders:
        return ClosedForm(e)
    # expression must be affine in the atom placeholders
    atoms = []
    rest = e
    for name, atom in holders.items():
        cs = rest.coefficients_in(name) if name in rest.free_symbols() else [rest]
        if len(cs) > 2:
            raise ExprError("closed forms must be linear in transcendental atoms")
        if len(cs) == 2:
            atoms.append((cs[1], atom))
        rest = cs[0]
    for name in holders:
        if name in rest.free_symbols():
            raise ExprError("closed forms must be linear in transcendental atoms")
    return ClosedForm(rest, atoms)


# integration ---------------------------------------------------------------


def _uni(e: RationalExpr, var: str) -> list:
    """Coefficient list (low to high) of a polynomial in ``var``."""
    return e.coefficients_in(var)


def _trim(p):
    while p and p[-1].is_zero():
        p.pop()
    return p


def _padd(p, q):
    n = max(len(p), len(q))
    out = [(p[i] if i < len(p) else const(0)) + (q[i] if i < len(q) else const(0)) for i in range(n)]
    return _trim(out)


def _pmul(p, q):
    if not p or not q:
        return []
    out = [const(0)] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a.is_zero():
            continue
        for j, b in enumerate(q):
            out[i + j] = out[i + j] + a * b
    return _trim(out)


def _pdivmod(p, q):
    p = list(p)
    q = _trim(list(q))
    if not q:
        raise ZeroDivisionError
    quo = [const(0)] * max(len(p) - len(q) + 1, 0)
    lc = q[-1]
    while len(_trim(p)) >= len(q):
        k = len(p) - len(q)
        c = p[-1] / lc
        quo[k] = c
        for i, b in enumerate(q):
            p[i + k] = p[i + k] - c * b
        p.pop()
    return _trim(quo), _trim(p)


def _to_expr(p, var):
    from .core import sym

    x = sym(var)
    out = const(0)
    for c in reversed(p):
        out = out * x + c
    return out


def _solve(matrix, rhs):
    """Gaussian elimination over rational functions."""
    n = len(rhs)
    a = [list(row) + [r] for row, r in zip(matrix, rhs)]
    for col in range(n):
        piv = next((r for r in range(col, n) if not a[r][col].is_zero()), None)
        if piv is None:
            return None
        a[col], a[piv] = a[piv], a[col]
        inv = a[col][col].inverse()
        a[col] = [v * inv for v in a[col]]
        for r in range(n):
            if r != col and not a[r][col].is_zero():
                f = a[r][col]
                a[r] = [v - f * w for v, w in zip(a[r], a[col])]
    return [a[i][n] for i in range(n)]


def sqrt_expr(e: RationalExpr):
    """Exact square root of a rational function, or ``None``."""
    try:
        n = e.num.sqrt()
        d = e.den.sqrt()
    except Exception:
        return None
    return RationalExpr(n, d)


def integrate(e: RationalExpr, var: str) -> ClosedForm | None:
    """Antiderivative of ``e`` in ``var`` as a :class:`ClosedForm`, or ``None``."""
    if var not in e.free_symbols():
        from .core import sym

        return ClosedForm(e * sym(var))
    if e.is_polynomial():
        return ClosedForm(RationalExpr.from_poly(e.num.integral(var)))
    # factor the denominator, separating var-free content
    c, facs = e.den.factor()
    scale = const(1) / RationalExpr.from_poly(e.den.context().constant(c))
    vfacs = []
    for f, m in facs:
        fe = RationalExpr.from_poly(f)
        if var in fe.free_symbols():
            vfacs.append((fe, int(m)))
        else:
            scale = scale / fe ** int(m)
    num = RationalExpr.from_poly(e.num)
    dvar = const(1)
    for f, m in vfacs:
        dvar = dvar * f ** m
    # num/dvar = quo + rem/dvar
    quo, rem = _pdivmod(_uni(num, var), _uni(dvar, var))
    result = ClosedForm()
    if quo:
        qe = _to_expr(quo, var)
        result = result + _integrate_poly(qe, var)
    if rem:
        pf = _partial_fractions(rem, vfacs, var)
        if pf is None:
            return None
        for term in pf:
            piece = _integrate_simple(term, var)
            if piece is None:
                return None
            result = result + piece
    result = _merge_log_pairs(result, var)
    result = result.scale(scale)
    if result.diff(var) != ClosedForm(e):
        return None
    return result


def _integrate_poly(p: RationalExpr, var: str) -> ClosedForm:
    from .core import sym

    cs = p.coefficients_in(var)
    x = sym(var)
    out = const(0)
    for k, c in enumerate(cs):
        if not c.is_zero():
            out = out + c * x ** (k + 1) / (k + 1)
    return ClosedForm(out)


def _partial_fractions(rem, vfacs, var):
    """Decompose ``rem / prod f^m`` into simple fractions.

    Returns a list of (numerator coefficients, factor coefficients, power).
    """
    dvar_u = [const(1)]
    for f, m in vfacs:
        for _ in range(m):
            dvar_u = _pmul(dvar_u, _uni(f, var))
    n = len(dvar_u) - 1
    unknowns = []  # (factor_u, power, degree of numerator monomial)
    for f, m in vfacs:
        fu = _uni(f, var)
        deg = len(fu) - 1
        if deg > 2 or (deg == 2 and m > 1):
            return None
        for k in range(1, m + 1):
            for j in range(deg):
                unknowns.append((fu, k, j, f, m))
    if len(unknowns) != n:
        return None
    columns = []
    for fu, k, j, f, m in unknowns:
        # x^j * dvar / f^k
        cof = [const(1)]
        for g, mg in vfacs:
            times = mg - (k if g is f else 0)
            gu = _uni(g, var)
            for _ in range(times):
                cof = _pmul(cof, gu)
        col = _pmul([const(0)] * j + [const(1)], cof)
        col = col + [const(0)] * (n - len(col))
        columns.append(col)
    rhs = list(rem) + [const(0)] * (n - len(rem))
    matrix = [[columns[c][r] for c in range(n)] for r in range(n)]
    sol = _solve(matrix, rhs)
    if sol is None:
        return None
    terms = {}
    for (fu, k, j, f, m), s in zip(unknowns, sol):
        key = (id(f), k)
        if key not in terms:
            terms[key] = [fu, k, [const(0)] * (len(fu) - 1)]
        terms[key][2][j] = s
    return [(tuple(v[2]), tuple(v[0]), v[1]) for v in terms.values()]


def _integrate_simple(term, var):
    from .core import sym

    nums, fu, k = term
    x = sym(var)
    f = _to_expr(list(fu), var)
    if len(fu) == 2:
        c = nums[0]
        a = fu[1]
        if c.is_zero():
            return ClosedForm()
        if k == 1:
            return ClosedForm(const(0), [(c / a, Atom("log", f))])
        return ClosedForm(c / (a * (1 - k)) * f ** (1 - k))
    # quadratic, power 1: (p x + q) / (a x^2 + b x + c)
    q, p = nums
    c0, b, a = fu
    out = ClosedForm()
    if not p.is_zero():
        out = out + ClosedForm(const(0), [(p / (2 * a), Atom("log", f))])
    rest = q - p * b / (2 * a)
    if rest.is_zero():
        return out
    delta = 4 * a * c0 - b * b
    s = sqrt_expr(delta)
    if s is not None:
        return out + ClosedForm(const(0), [_odd("arctan", 2 * rest / s, (2 * a * x + b) / s)])
    s = sqrt_expr(-delta)
    if s is not None:
        return out + ClosedForm(const(0), [_odd("arctanh", -2 * rest / s, (2 * a * x + b) / s)])
    return None


def _odd(kind: str, c: RationalExpr, arg: RationalExpr):
    """Use oddness of arctan/arctanh to keep a positive leading coefficient."""
    if arg.num.leading_coefficient() < 0:
        return (-c, Atom(kind, -arg))
    return (c, Atom(kind, arg))


def _merge_log_pairs(cf: ClosedForm, var: str) -> ClosedForm:
    from .core import sym

    x = sym(var)
    logs = []
    others = []
    for c, a in cf.atoms:
        if a.kind == "log" and a.arg.is_polynomial() and a.arg.degree_in(var) == 1:
            logs.append((c, a))
        else:
            others.append((c, a))
    used = set()
    merged = []
    for i, (c1, a1) in enumerate(logs):
        if i in used:
            continue
        for j in range(i + 1, len(logs)):
            if j in used:
                continue
            c2, a2 = logs[j]
            if (c1 + c2).is_zero():
                b1, s1 = a1.arg.coefficients_in(var)
                b2, s2 = a2.arg.coefficients_in(var)
                r1, r2 = -b1 / s1, -b2 / s2
                m = (r1 + r2) / 2
                h = (r2 - r1) / 2
                merged.append(_odd("arctanh", 2 * c1, (x - m) / h))
                used.update((i, j))
                break
    rest = [logs[i] for i in range(len(logs)) if i not in used]
    return ClosedForm(cf.rational, tuple(merged) + tuple(rest) + tuple(others))
