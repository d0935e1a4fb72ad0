"""Recursive-descent parser for the expression language.

Grammar (informal)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('+' | '-') unary | power
    power  := atom ('^' INT)?
    atom   := INT | SYMBOL | '(' expr ')' | FUNC '(' expr ')'

Shift variables are written ``x[k]`` for ``k`` in ``-2..2`` (aliases
``xm2, xm1, x0, x1, x2``); continuum jets are ``x, x', ..., x''''`` and
``t``.  Every other identifier is a parameter.
"""

from __future__ import annotations

import re
from typing import Callable, Iterable

from .core import ExprError, RationalExpr, const, jet_name, shift_name, sym

ALIASES = {
    "xm2": shift_name(-2),
    "xm1": shift_name(-1),
    "x0": shift_name(0),
    "x1": shift_name(1),
    "x2": shift_name(2),
    "λ": "lambda",
}

_TOKEN = re.compile(
    r"""\s*(?:
        (?P<num>\d+)
      | (?P<shift>x\[\s*[+-]?\s*\d+\s*\])
      | (?P<jet>x(?:'{1,4}|\(\d+\)))
      | (?P<ident>[^\W\d]\w*)
      | (?P<op>\*\*|[-+*/^(),])
    )""",
    re.VERBOSE,
)


def tokenize(text: str) -> list:
    pos = 0
    out = []
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ExprError(f"unexpected character {text[pos]!r} at position {pos}")
        kind = m.lastgroup
        val = m.group(kind)
        if kind == "op" and val == "**":
            val = "^"
        out.append((kind, val, m.start(kind)))
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    return out


class _Parser:
    def __init__(self, tokens, params, shift_range, functions):
        self.toks = tokens
        self.i = 0
        self.params = params
        self.shift_range = shift_range
        self.functions = functions

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None, -1)

    def take(self, val=None):
        tok = self.peek()
        if tok[0] is None:
            raise ExprError("unexpected end of input")
        if val is not None and tok[1] != val:
            raise ExprError(f"expected {val!r} at position {tok[2]}, found {tok[1]!r}")
        self.i += 1
        return tok

    def parse(self):
        e = self.expr()
        if self.peek()[0] is not None:
            tok = self.peek()
            raise ExprError(f"unexpected token {tok[1]!r} at position {tok[2]}")
        return e

    def expr(self):
        e = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            r = self.term()
            e = e + r if op == "+" else e - r
        return e

    def term(self):
        e = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            r = self.unary()
            if op == "*":
                e = e * r
            else:
                if _is_zero(r):
                    raise ExprError("division by zero")
                e = e / r
        return e

    def unary(self):
        if self.peek()[1] == "-":
            self.take()
            return -self.unary()
        if self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            neg = False
            if self.peek()[1] == "-":
                self.take()
                neg = True
            kind, val, pos = self.take()
            if kind == "op" and val == "(":
                inner = self.expr()
                self.take(")")
                try:
                    k = int(inner.constant_value())
                    ok = inner.constant_value() == k
                except Exception:
                    ok = False
                if not ok:
                    raise ExprError(f"exponent at position {pos} must be an integer")
            elif kind == "num":
                k = int(val)
            else:
                raise ExprError(f"exponent at position {pos} must be an integer")
            if neg:
                k = -k
            if k < 0 and _is_zero(base):
                raise ExprError("division by zero")
            return base ** k
        return base

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            return const(int(val))
        if kind == "shift":
            k = int(val[2:-1].replace(" ", ""))
            lo, hi = self.shift_range
            if not lo <= k <= hi:
                raise ExprError(f"shift x[{k}] outside the window {lo}..{hi}")
            return sym(shift_name(k))
        if kind == "jet":
            if "(" in val:
                return sym(jet_name(int(val[2:-1])))
            return sym(jet_name(len(val) - 1))
        if kind == "ident":
            if self.peek()[1] == "(" and val in self.functions:
                self.take("(")
                arg = self.expr()
                self.take(")")
                return self.functions[val](arg)
            name = ALIASES.get(val, val)
            if name == "x" or name == "t" or name.startswith("x["):
                return sym(name)
            if self.params is not None and name not in self.params:
                raise ExprError(f"undeclared symbol {val!r} at position {pos}")
            return sym(name)
        if kind == "op" and val == "(":
            e = self.expr()
            self.take(")")
            return e
        raise ExprError(f"unexpected token {val!r} at position {pos}")


def _is_zero(e) -> bool:
    return isinstance(e, RationalExpr) and e.is_zero()


def parse(
    text: str,
    params: Iterable[str] | None = None,
    shift_range: tuple = (-2, 2),
    functions: dict[str, Callable] | None = None,
) -> RationalExpr:
    """Parse ``text`` into a :class:`RationalExpr`.

    Parameters
    ----------
    params : iterable of str, optional
        Declared parameter names.  When given, any other identifier is an
        error; when omitted, identifiers are accepted as parameters.
    shift_range : (int, int)
        Allowed offsets for ``x[k]``.
    """
    if not isinstance(text, str) or not text.strip():
        raise ExprError("empty expression")
    toks = tokenize(text)
    p = _Parser(toks, set(params) if params is not None else None, shift_range, functions or {})
    return p.parse()
