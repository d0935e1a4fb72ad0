"""Selects the compiled kernels when built, otherwise the pure-Python twin.

Set ``ADDLAG_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

import numpy as np

from .expr.core import RationalExpr, _names

if os.environ.get("ADDLAG_PURE_PYTHON"):
    from . import _kernels_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        from . import _kernels_py as _impl

        BACKEND = "python"

poly_eval = _impl.poly_eval
rational_eval = _impl.rational_eval
iterate = _impl.iterate


def sparse(poly, varnames) -> tuple:
    """``(coefficients, exponents)`` arrays of a flint polynomial over ``varnames``."""
    names = _names(poly)
    index = {n: i for i, n in enumerate(varnames)}
    missing = [n for n, d in zip(names, poly.degrees()) if d > 0 and n not in index]
    if missing:
        raise ValueError(f"no slot for variables {missing}")
    terms = list(poly.terms())
    c = np.empty(len(terms), dtype=np.float64)
    e = np.zeros((len(terms), len(varnames)), dtype=np.int32)
    for k, (exps, coef) in enumerate(terms):
        c[k] = int(coef.p) / int(coef.q)
        for n, m in zip(names, exps):
            if m:
                e[k, index[n]] = m
    return c, e


def sparse_rational(expr: RationalExpr, varnames) -> tuple:
    return sparse(expr.num, varnames) + sparse(expr.den, varnames)
