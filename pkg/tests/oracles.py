"""Independent reference computations built on sympy."""

import re

import sympy as sp

SHIFT = re.compile(r"x\[\s*(-?\d+)\s*\]")
JET = re.compile(r"\bx(?:\((\d+)\)|('+)|(?![\w\[']))")


def jet_symbol(k: int) -> sp.Symbol:
    """Continuum jet ``x^(k)`` as the sympy symbol ``d<k>``."""
    return sp.Symbol(f"d{k}")


def _jet_sub(m) -> str:
    if m.group(1):
        return f"d{m.group(1)}"
    return f"d{len(m.group(2) or '')}"


def sympy_name(k: int) -> str:
    return f"xm{-k}" if k < 0 else f"x{k}"


def to_sympy(e) -> sp.Expr:
    """Parse our printed form with sympy's own parser."""
    text = SHIFT.sub(lambda m: sympy_name(int(m.group(1))), str(e))
    text = JET.sub(_jet_sub, text).replace("^", "**")
    names = set(re.findall(r"[A-Za-z_]\w*", text)) - {"log", "arctan", "arctanh"}
    local = {n: sp.Symbol(n) for n in names}
    local.update(log=sp.log, arctan=sp.atan, arctanh=sp.atanh)
    return sp.sympify(text, locals=local)


def X(k: int) -> sp.Symbol:
    return sp.Symbol(sympy_name(k))


def shift(e: sp.Expr, k: int) -> sp.Expr:
    subs = {X(j): X(j + k) for j in range(-6, 7)}
    return e.xreplace(subs)


def euler_lagrange(L: sp.Expr, lam=1) -> sp.Expr:
    """Stationarity of ``sum lam^-n L(x[n+2], x[n+1], x[n])`` in ``x[n]``, times ``lam^n``."""
    lam = sp.nsimplify(lam)
    return sp.diff(L, X(0)) + lam * shift(sp.diff(L, X(1)), -1) + lam**2 * shift(sp.diff(L, X(2)), -2)


def same(a, b) -> bool:
    return sp.simplify(to_sympy(a) - (b if isinstance(b, sp.Basic) else to_sympy(b))) == 0
