"""Pure-Python twin of the compiled kernels (same signatures and semantics)."""

from __future__ import annotations

import math

import numpy as np

OK, POLE, OVERFLOW = 0, 1, 2


def _peval(c, e, x) -> float:
    acc = 0.0
    for k in range(len(c)):
        t = c[k]
        for j, m in enumerate(e[k]):
            if m:
                t *= x[j] ** int(m)
        acc += t
    return acc


def poly_eval(c, e, pts):
    pts = np.asarray(pts, dtype=np.float64)
    return np.array([_peval(c, e, row) for row in pts], dtype=np.float64)


def rational_eval(nc, ne, dc, de, pts):
    pts = np.asarray(pts, dtype=np.float64)
    out = np.empty(len(pts))
    for i, row in enumerate(pts):
        d = _peval(dc, de, row)
        out[i] = math.nan if d == 0.0 else _peval(nc, ne, row) / d
    return out


def iterate(nc, ne, dc, de, state0, n_steps, direction, pole_tol):
    nc, dc = [float(v) for v in nc], [float(v) for v in dc]
    ne, de = [tuple(int(m) for m in r) for r in ne], [tuple(int(m) for m in r) for r in de]
    s = [float(v) for v in state0]
    rows = [tuple(s)]
    status = OK
    i = 0
    while i < n_steps:
        norm2 = s[0] * s[0] + s[1] * s[1] + s[2] * s[2] + s[3] * s[3]
        d = _peval(dc, de, s)
        if abs(d) < pole_tol * (1.0 + norm2):
            status = POLE
            break
        try:
            v = _peval(nc, ne, s) / d
        except OverflowError:
            v = math.inf
        if not math.isfinite(v):
            status = OVERFLOW
            break
        s = [v, s[0], s[1], s[2]] if direction > 0 else [s[1], s[2], s[3], v]
        i += 1
        rows.append(tuple(s))
    return np.array(rows, dtype=np.float64).reshape(-1, 4), i, status
