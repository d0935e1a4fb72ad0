"""Floating-point evaluation of rational expressions via compiled closures."""

from __future__ import annotations

from functools import lru_cache

from .core import PoleError, RationalExpr, _names


def _poly_source(p, index: dict) -> str:
    names = _names(p)
    terms = []
    for exps, c in p.terms():
        factors = [repr(float(int(c.p)) / float(int(c.q))) if c.q != 1 else f"{int(c.p)}.0"]
        for i, e in enumerate(exps):
            if e:
                v = f"v[{index[names[i]]}]"
                factors.append(v if e == 1 else f"{v}**{e}")
        terms.append("*".join(factors))
    return " + ".join(terms) if terms else "0.0"


@lru_cache(maxsize=4096)
def _compile(e: RationalExpr, varnames: tuple):
    index = {n: i for i, n in enumerate(varnames)}
    num = _poly_source(e.num, index)
    den = _poly_source(e.den, index)
    src = f"def f(v):\n    d = {den}\n    if d == 0.0:\n        raise PoleError('pole')\n    return ({num}) / d\n"
    ns = {"PoleError": PoleError}
    exec(src, ns)
    return ns["f"]


def compile_float(e: RationalExpr, varnames) -> callable:
    """Return ``f(values)`` evaluating ``e`` with ``values`` ordered as ``varnames``."""
    varnames = tuple(varnames)
    missing = e.free_symbols() - set(varnames)
    if missing:
        raise ValueError(f"no value for {sorted(missing)}")
    return _compile(e, varnames)


def evaluate_float(e: RationalExpr, point: dict) -> float:
    names = tuple(sorted(point))
    f = compile_float(e, names)
    return f([float(point[n]) for n in names])
