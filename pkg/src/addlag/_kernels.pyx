# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled float kernels: sparse polynomial evaluation and orbit iteration.

Polynomials are given as a coefficient vector ``c[m]`` and an exponent
matrix ``e[m, nv]``.  Rational maps are a numerator/denominator pair.
"""

import numpy as np

from libc.math cimport NAN, fabs, isfinite

cdef enum:
    OK = 0
    POLE = 1
    OVERFLOW = 2


cdef inline double _peval(const double[::1] c, const int[:, ::1] e, const double* x) noexcept nogil:
    cdef Py_ssize_t k, j
    cdef int m
    cdef double acc = 0.0, t
    for k in range(c.shape[0]):
        t = c[k]
        for j in range(e.shape[1]):
            m = e[k, j]
            while m > 0:
                t *= x[j]
                m -= 1
        acc += t
    return acc


def poly_eval(const double[::1] c, const int[:, ::1] e, const double[:, ::1] pts):
    """Evaluate one polynomial at each row of ``pts``."""
    cdef Py_ssize_t n = pts.shape[0], i
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = _peval(c, e, &pts[i, 0])
    return out


def rational_eval(const double[::1] nc, const int[:, ::1] ne, const double[::1] dc, const int[:, ::1] de,
                  const double[:, ::1] pts):
    """Evaluate ``num/den`` at each row of ``pts``; poles give ``nan``."""
    cdef Py_ssize_t n = pts.shape[0], i
    cdef double d
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            d = _peval(dc, de, &pts[i, 0])
            if d == 0.0:
                o[i] = NAN
            else:
                o[i] = _peval(nc, ne, &pts[i, 0]) / d
    return out


def iterate(const double[::1] nc, const int[:, ::1] ne, const double[::1] dc, const int[:, ::1] de,
            state0, Py_ssize_t n_steps, int direction, double pole_tol):
    """Iterate the window map ``n_steps`` times.

    The new value is ``num/den`` of the current window ``(x1, x0, x-1, x-2)``;
    ``direction=1`` pushes it on top, ``direction=-1`` at the bottom.
    Returns ``(orbit, steps_done, status)`` with status 0 ok, 1 pole, 2 overflow.
    """
    orbit = np.zeros((n_steps + 1, 4), dtype=np.float64)
    cdef double[:, ::1] o = orbit
    cdef double s[4]
    cdef double v, d, norm2
    cdef Py_ssize_t i, j
    cdef int status = OK
    for j in range(4):
        s[j] = state0[j]
        o[0, j] = s[j]
    i = 0
    with nogil:
        while i < n_steps:
            norm2 = s[0] * s[0] + s[1] * s[1] + s[2] * s[2] + s[3] * s[3]
            d = _peval(dc, de, s)
            if fabs(d) < pole_tol * (1.0 + norm2):
                status = POLE
                break
            v = _peval(nc, ne, s) / d
            if not isfinite(v):
                status = OVERFLOW
                break
            if direction > 0:
                s[3] = s[2]
                s[2] = s[1]
                s[1] = s[0]
                s[0] = v
            else:
                s[0] = s[1]
                s[1] = s[2]
                s[2] = s[3]
                s[3] = v
            i += 1
            for j in range(4):
                o[i, j] = s[j]
    return orbit[: i + 1], i, status
