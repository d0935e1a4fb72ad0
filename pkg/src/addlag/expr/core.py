"""Exact rational functions over Q backed by FLINT multivariate polynomials.

A :class:`RationalExpr` is a reduced quotient ``num/den`` of two
``fmpq_mpoly`` objects with ``gcd(num, den) = 1`` and ``den`` monic with
respect to the degree-lexicographic order.  Because the variable order is
fixed (see :func:`symbol_key`), the representation is canonical and
structural equality coincides with mathematical equality.
"""

from __future__ import annotations

import re
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping

import flint

__all__ = [
    "RationalExpr",
    "ExprError",
    "PoleError",
    "shift_name",
    "jet_name",
    "symbol_key",
    "sym",
    "const",
    "SHIFT_NAMES",
    "PLACEHOLDERS",
    "term_count",
]


class ExprError(ValueError):
    """Raised for malformed expressions or unsupported operations."""


class PoleError(ZeroDivisionError):
    """Raised when an expression is evaluated at a zero of its denominator."""


SHIFT_NAMES = {k: f"x[{k}]" for k in range(-2, 3)}
PLACEHOLDERS = ("xi", "eta", "zeta")
_JET_RE = re.compile(r"^x('{0,4}|\((\d+)\))$")
_SHIFT_RE = re.compile(r"^x\[(-?\d+)\]$")


def shift_name(k: int) -> str:
    return f"x[{k}]"


def jet_name(order: int) -> str:
    """Name of the ``order``-th derivative of the continuum variable."""
    if order <= 4:
        return "x" + "'" * order
    return f"x({order})"


def _jet_order(name: str):
    m = _JET_RE.match(name)
    if not m:
        return None
    if m.group(2) is not None:
        return int(m.group(2))
    return len(m.group(1))


def symbol_key(name: str):
    """Sort key fixing the global variable precedence.

    Shift variables come first ordered by offset, then the placeholder
    arguments, then continuum jets by order, then ``t``, then every other
    symbol (parameters) alphabetically.
    """
    m = _SHIFT_RE.match(name)
    if m:
        return (0, int(m.group(1)), "")
    if name in PLACEHOLDERS:
        return (1, PLACEHOLDERS.index(name), "")
    order = _jet_order(name)
    if order is not None:
        return (2, order, "")
    if name == "t":
        return (3, 0, "")
    return (4, 0, name)


@lru_cache(maxsize=None)
def _ctx(names: tuple):
    return flint.fmpq_mpoly_ctx.get(names, "deglex")


def _ctx_for(names: Iterable[str]):
    return _ctx(tuple(sorted(set(names), key=symbol_key)))


_EMPTY = _ctx(())


def _names(p) -> tuple:
    return p.context().names()


def _lift(p, ctx):
    if p.context() is ctx:
        return p
    return p.project_to_context(ctx)


def _to_fmpq(c) -> flint.fmpq:
    if isinstance(c, flint.fmpq):
        return c
    if isinstance(c, Fraction):
        return flint.fmpq(c.numerator, c.denominator)
    if isinstance(c, int):
        return flint.fmpq(c)
    if isinstance(c, flint.fmpz):
        return flint.fmpq(c)
    raise TypeError(f"cannot convert {type(c).__name__} to an exact rational")


def term_count(e) -> int:
    return len(e.num) + len(e.den)


class RationalExpr:
    """Immutable reduced rational function with rational coefficients."""

    __slots__ = ("num", "den", "_hash")

    def __init__(self, num, den=None, *, _reduced: bool = False):
        if den is None:
            den = num.context().constant(1)
        if num.context() is not den.context():
            ctx = _ctx_for(_names(num) + _names(den))
            num, den = _lift(num, ctx), _lift(den, ctx)
        if not _reduced:
            num, den = _reduce(num, den)
        self.num = num
        self.den = den
        self._hash = None

    # construction -----------------------------------------------------
    @staticmethod
    def from_poly(p) -> "RationalExpr":
        return RationalExpr(p, p.context().constant(1), _reduced=True)

    @property
    def ctx(self):
        return self.num.context()

    # predicates -------------------------------------------------------
    def is_zero(self) -> bool:
        return self.num.is_zero()

    def is_polynomial(self) -> bool:
        return self.den.is_one()

    def is_constant(self) -> bool:
        return self.num.is_constant() and self.den.is_constant()

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise ExprError("expression is not a constant")
        c = _poly_const(self.num)
        return Fraction(int(c.p), int(c.q))

    def free_symbols(self) -> set:
        out = set()
        for p in (self.num, self.den):
            names = _names(p)
            for i, d in enumerate(p.degrees()):
                if d > 0:
                    out.add(names[i])
        return out

    def degree_in(self, var: str) -> int:
        """Degree of the numerator in ``var`` (the denominator must not involve it)."""
        return _deg(self.num, var)

    def den_degree_in(self, var: str) -> int:
        return _deg(self.den, var)

    # arithmetic -------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, RationalExpr):
            return other
        if isinstance(other, (int, Fraction, flint.fmpq, flint.fmpz)):
            return const(other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        a, b, c, d = _unify(self.num, self.den, other.num, other.den)
        if b == d:
            if b.is_one():
                return RationalExpr(a + c, b, _reduced=True)
            return RationalExpr(a + c, b)
        if b.is_one():
            return RationalExpr(a * d + c, d, _reduced=True)
        if d.is_one():
            return RationalExpr(a + c * b, b, _reduced=True)
        g = b.gcd(d)
        if g.is_one():
            return RationalExpr(a * d + c * b, b * d)
        bg, dg = b / g, d / g
        return RationalExpr(a * dg + c * bg, bg * d)

    __radd__ = __add__

    def __neg__(self):
        return RationalExpr(-self.num, self.den, _reduced=True)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other + (-self)

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        a, b, c, d = _unify(self.num, self.den, other.num, other.den)
        if b.is_one() and d.is_one():
            return RationalExpr(a * c, b, _reduced=True)
        g1 = a.gcd(d)
        g2 = c.gcd(b)
        if not g1.is_one():
            a, d = a / g1, d / g1
        if not g2.is_one():
            c, b = c / g2, b / g2
        num, den = a * c, b * d
        return RationalExpr(*_monic(num, den), _reduced=True)

    __rmul__ = __mul__

    def inverse(self) -> "RationalExpr":
        if self.is_zero():
            raise ZeroDivisionError("inverse of zero expression")
        return RationalExpr(*_monic(self.den, self.num), _reduced=True)

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self * other.inverse()

    def __rtruediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other * self.inverse()

    def __pow__(self, k: int):
        if not isinstance(k, int):
            raise ExprError("only integer powers are supported")
        if k < 0:
            return self.inverse() ** (-k)
        return RationalExpr(self.num ** k, self.den ** k, _reduced=True)

    # comparison -------------------------------------------------------
    def __eq__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return False
        a, b, c, d = _unify(self.num, self.den, other.num, other.den)
        return a == c and b == d

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((_canon_terms(self.num), _canon_terms(self.den)))
        return self._hash

    # calculus and substitution ---------------------------------------
    def diff(self, var: str) -> "RationalExpr":
        dn = _pdiff(self.num, var)
        dd = _pdiff(self.den, var)
        if dd is None or dd.is_zero():
            if dn is None:
                return const(0)
            return RationalExpr(dn, self.den)
        if dn is None:
            dn = self.num.context().constant(0)
        n, d, dn, dd = _unify(self.num, self.den, dn, dd)
        return RationalExpr(dn * d - n * dd, d * d)

    def subs(self, mapping: Mapping) -> "RationalExpr":
        """Simultaneous substitution ``{name: value}``."""
        mp = {}
        for k, v in mapping.items():
            if k in self.free_symbols():
                mp[k] = v if isinstance(v, RationalExpr) else const(v)
        if not mp:
            return self
        nn, nd = _subs_poly(self.num, mp)
        if self.den.is_one():
            return RationalExpr(nn, nd)
        dn, dd = _subs_poly(self.den, mp)
        return RationalExpr(nn, nd) / RationalExpr(dn, dd)

    def rename(self, mapping: Mapping[str, str]) -> "RationalExpr":
        return self.subs({k: sym(v) for k, v in mapping.items()})

    def shift(self, k: int) -> "RationalExpr":
        """Apply the shift operator ``T^k`` to every shift variable."""
        if k == 0:
            return self
        mp = {}
        for name in self.free_symbols():
            m = _SHIFT_RE.match(name)
            if m:
                mp[name] = sym(shift_name(int(m.group(1)) + k))
        return self.subs(mp)

    # polynomial structure ---------------------------------------------
    def coefficients_in(self, var: str) -> list:
        """Coefficients of the numerator in ``var`` divided by the denominator.

        Requires the denominator to be free of ``var``.
        """
        if _deg(self.den, var) > 0:
            raise ExprError(f"denominator depends on {var}")
        polys = poly_coefficients(self.num, var)
        d = RationalExpr(self.den.context().constant(1), self.den, _reduced=False) if not self.den.is_one() else None
        out = []
        for p in polys:
            r = RationalExpr.from_poly(p)
            out.append(r if d is None else r * d)
        return out

    def numerator(self) -> "RationalExpr":
        return RationalExpr.from_poly(self.num)

    def denominator(self) -> "RationalExpr":
        return RationalExpr.from_poly(self.den)

    # evaluation -------------------------------------------------------
    def evaluate(self, point: Mapping) -> Fraction:
        """Exact evaluation at rational values for every free symbol."""
        free = self.free_symbols()
        missing = free - set(point)
        if missing:
            raise ExprError(f"no value for {sorted(missing)}")
        vals = {k: _to_fmpq(point[k]) for k in free}
        n = _eval_poly(self.num, vals)
        d = _eval_poly(self.den, vals)
        if d == 0:
            raise PoleError("denominator vanishes at the evaluation point")
        q = n / d
        return Fraction(int(q.p), int(q.q))

    def evaluate_fmpq(self, vals: Mapping) -> flint.fmpq:
        n = _eval_poly(self.num, vals)
        d = _eval_poly(self.den, vals)
        if d == 0:
            raise PoleError("denominator vanishes at the evaluation point")
        return n / d

    def __repr__(self):
        from .printing import to_string

        return f"RationalExpr({to_string(self)!r})"

    def __str__(self):
        from .printing import to_string

        return to_string(self)


# helpers -----------------------------------------------------------------


def _canon_terms(p):
    names = _names(p)
    out = []
    for exps, c in p.to_dict().items():
        out.append((tuple((names[i], e) for i, e in enumerate(exps) if e), (int(c.p), int(c.q))))
    return tuple(sorted(out))


def _poly_const(p) -> flint.fmpq:
    if p.is_zero():
        return flint.fmpq(0)
    return p.leading_coefficient()


def _deg(p, var) -> int:
    names = _names(p)
    if var not in names:
        return 0
    d = p.degrees()[names.index(var)]
    return max(int(d), 0)


def _pdiff(p, var):
    if var not in _names(p):
        return None
    return p.derivative(var)


def _unify(a, b, c, d):
    ctx = a.context()
    if b.context() is ctx and c.context() is ctx and d.context() is ctx:
        return a, b, c, d
    ctx = _ctx_for(_names(a) + _names(b) + _names(c) + _names(d))
    return _lift(a, ctx), _lift(b, ctx), _lift(c, ctx), _lift(d, ctx)


def _monic(num, den):
    lc = den.leading_coefficient()
    if lc != 1:
        inv = 1 / lc
        return num * inv, den * inv
    return num, den


def _reduce(num, den):
    if den.is_zero():
        raise ZeroDivisionError("zero denominator")
    if num.is_zero():
        return num, num.context().constant(1)
    if den.is_constant():
        return num * (1 / _poly_const(den)), num.context().constant(1)
    g = num.gcd(den)
    if not g.is_one():
        num, den = num / g, den / g
    return _monic(num, den)


def poly_coefficients(p, var: str) -> list:
    """Split a polynomial into its coefficients with respect to ``var``."""
    names = _names(p)
    if var not in names:
        return [p]
    i = names.index(var)
    deg = _deg(p, var)
    buckets = [dict() for _ in range(deg + 1)]
    for exps, c in p.to_dict().items():
        e = list(exps)
        k = e[i]
        e[i] = 0
        buckets[k][tuple(e)] = c
    ctx = p.context()
    return [ctx.from_dict(b) if b else ctx.constant(0) for b in buckets]


def _eval_poly(p, vals: Mapping) -> flint.fmpq:
    names = _names(p)
    if not names:
        return _poly_const(p)
    args = []
    for n in names:
        if n in vals:
            args.append(vals[n])
        else:
            args.append(flint.fmpq(0))
    return p(*args)


def _subs_poly(p, mp: Mapping[str, RationalExpr]):
    """Substitute rational values into a polynomial, returning (num, den) polys."""
    names = _names(p)
    targets = [n for n in names if n in mp and _deg(p, n) > 0]
    if not targets:
        return p, p.context().constant(1)
    all_names = set(n for n in names if n not in targets)
    for n in targets:
        all_names.update(_names(mp[n].num))
        all_names.update(_names(mp[n].den))
    poly_targets = [n for n in targets if mp[n].den.is_one()]
    frac_targets = [n for n in targets if not mp[n].den.is_one()]
    aux = [f"__w{j}" for j in range(len(frac_targets))]
    tctx = _ctx_for(all_names)
    hnames = tuple(names) + tuple(aux)
    hctx = _ctx(hnames) if aux else p.context()
    if aux:
        degs = {n: _deg(p, n) for n in frac_targets}
        idx = {n: names.index(n) for n in frac_targets}
        d = {}
        nv = len(names)
        for exps, c in p.to_dict().items():
            e = list(exps) + [0] * len(aux)
            for j, n in enumerate(frac_targets):
                e[nv + j] = degs[n] - exps[idx[n]]
            d[tuple(e)] = c
        ph = hctx.from_dict(d)
    else:
        ph = p
    images = []
    for n in names:
        if n in mp and n in targets:
            images.append(_lift(mp[n].num, tctx))
        else:
            images.append(_lift(tctx.gens()[tctx.names().index(n)], tctx) if n in all_names else tctx.constant(0))
    for n in frac_targets:
        images.append(_lift(mp[n].den, tctx))
    num = ph.compose(*images, ctx=tctx)
    den = tctx.constant(1)
    for n in frac_targets:
        den = den * _lift(mp[n].den, tctx) ** _deg(p, n)
    return num, den


def sym(name: str) -> RationalExpr:
    ctx = _ctx((name,))
    return RationalExpr.from_poly(ctx.gens()[0])


def const(c) -> RationalExpr:
    return RationalExpr.from_poly(_EMPTY.constant(_to_fmpq(c)))
