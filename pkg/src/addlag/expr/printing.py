"""Deterministic text rendering of rational expressions."""

from __future__ import annotations

from .core import RationalExpr, _names


def _coeff_str(c) -> str:
    p, q = int(c.p), int(c.q)
    return str(p) if q == 1 else f"{p}/{q}"


def poly_to_string(p) -> str:
    if p.is_zero():
        return "0"
    names = _names(p)
    parts = []
    for exps, c in p.terms():
        mono = []
        for i, e in enumerate(exps):
            if e == 1:
                mono.append(names[i])
            elif e > 1:
                mono.append(f"{names[i]}^{e}")
        neg = c < 0
        a = -c if neg else c
        if mono:
            body = "*".join(mono)
            if a != 1:
                body = f"{_coeff_str(a)}*{body}"
        else:
            body = _coeff_str(a)
        parts.append((neg, body))
    out = ("-" if parts[0][0] else "") + parts[0][1]
    for neg, body in parts[1:]:
        out += (" - " if neg else " + ") + body
    return out


def _den_needs_parens(p) -> bool:
    if len(p) != 1:
        return True
    exps, c = next(iter(p.terms()))
    return c != 1 or sum(1 for e in exps if e) > 1


def to_string(e: RationalExpr) -> str:
    """Render ``e`` so that :func:`parse` reproduces it exactly."""
    n = poly_to_string(e.num)
    if e.den.is_one():
        return n
    d = poly_to_string(e.den)
    if len(e.num) > 1:
        n = f"({n})"
    if _den_needs_parens(e.den):
        d = f"({d})"
    return f"{n}/{d}"
