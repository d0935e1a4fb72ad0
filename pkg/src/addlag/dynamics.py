"""Iteration of additive fourth-order maps, invariant drift, and the
Jacobian and volume laws.

A state is the window ``(x1, x0, x-1, x-2)``.  Float orbits run on the
compiled kernels (or their pure-Python twin); exact orbits use rationals.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Mapping, Optional, Sequence

import flint
import numpy as np

from . import kernels
from .canonical import canonical_equation, canonical_lagrangian, canonical_model
from .expr import PoleError, RationalExpr, const, sym
from .expr.numeric import compile_float
from .family import forward_map
from .lagrangian import X0, X1, X2, XI, XM1, XM2, additive_form, factor_shift_split
from .poisson import det

WINDOW = (X1, X0, XM1, XM2)
POLE_TOL = 1e-12
BIT_LIMIT = 100_000

# Figure 1: case 1 with (alpha, beta, gamma) = (2, 0, -1), so that the origin is a fixed point
FIGURE1_PARAMS = (Fraction(2), Fraction(0), Fraction(-1))
FIGURE1_LAMBDA = Fraction(999, 1000)


class SingularStep(ArithmeticError):
    """The solved extremal value has a vanishing denominator at this state."""


class BitLengthExceeded(ArithmeticError):
    pass


@dataclass
class AdditiveMap:
    """Forward and backward window maps of ``equation = 0`` (numeric parameters)."""

    equation: RationalExpr
    forward: RationalExpr
    backward: RationalExpr
    g: Optional[RationalExpr] = None
    lam2: Optional[RationalExpr] = None
    label: str = ""
    _fw: tuple = field(default=None, repr=False)
    _bw: tuple = field(default=None, repr=False)

    @classmethod
    def from_equation(cls, equation: RationalExpr, label: str = "") -> "AdditiveMap":
        extra = {s for s in equation.free_symbols() if not s.startswith("x[")}
        if extra:
            raise ValueError(f"parameters {sorted(extra)} need numeric values")
        raw = additive_form(equation)
        fw = -(raw.B * sym(XM2) + raw.C) / raw.A
        bw = (-(raw.A * sym(X2) + raw.C) / raw.B).shift(-1)
        try:
            _, g, lam2 = factor_shift_split(raw)
        except ValueError:
            g = lam2 = None
        m = cls(equation, fw, bw, g, lam2, label)
        m._fw = kernels.sparse_rational(fw, WINDOW)
        m._bw = kernels.sparse_rational(bw, WINDOW)
        return m

    def g_at(self, var: str) -> RationalExpr:
        if self.g is None:
            raise ValueError("equation has no g(x1) x2 + lam2 g(x-1) x-2 structure")
        return self.g.subs({XI: sym(var)})


def canonical_map(case: int, alpha, beta, gamma) -> AdditiveMap:
    return AdditiveMap.from_equation(canonical_equation(case, alpha, beta, gamma), label=f"case {case}")


def dissipative_map(case: int, alpha, beta, gamma, lam) -> AdditiveMap:
    """Map from the Euler-Lagrange equation of ``lam^(-n) L_case``."""
    L = canonical_lagrangian(case, alpha, beta, gamma)
    L = replace(L, lam=const(Fraction(lam)))
    return AdditiveMap.from_equation(L.euler_lagrange(), label=f"case {case}, lambda={lam}")


# stepping ---------------------------------------------------------------------


def _to_fmpq(v) -> flint.fmpq:
    if isinstance(v, flint.fmpq):
        return v
    f = Fraction(v)
    return flint.fmpq(f.numerator, f.denominator)


def _step_exact(expr: RationalExpr, s, direction: int):
    vals = dict(zip(WINDOW, s))
    try:
        v = expr.evaluate_fmpq(vals)
    except PoleError as exc:
        raise SingularStep(f"pole of {expr.denominator()} at {tuple(map(str, s))}") from exc
    return (v, s[0], s[1], s[2]) if direction > 0 else (s[1], s[2], s[3], v)


def _step_float(m: AdditiveMap, s, direction: int):
    nc, ne, dc, de = m._fw if direction > 0 else m._bw
    orbit, done, status = kernels.iterate(nc, ne, dc, de, np.asarray(s, dtype=np.float64), 1, direction, POLE_TOL)
    if status == 1:
        expr = m.forward if direction > 0 else m.backward
        raise SingularStep(f"near-pole of {expr.denominator()} at {tuple(s)}")
    if status == 2:
        raise OverflowError("non-finite value")
    return tuple(float(v) for v in orbit[-1])


def step_forward(m: AdditiveMap, s, exact: bool = False):
    if exact:
        return _step_exact(m.forward, tuple(_to_fmpq(v) for v in s), 1)
    return _step_float(m, s, 1)


def step_backward(m: AdditiveMap, s, exact: bool = False):
    if exact:
        return _step_exact(m.backward, tuple(_to_fmpq(v) for v in s), -1)
    return _step_float(m, s, -1)


@dataclass
class Orbit:
    states: object  # ndarray (n, 4) in float mode, list of fmpq 4-tuples in exact mode
    mode: str
    steps: int
    status: str = "ok"
    diagnostic: str = ""
    label: str = ""
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.states)

    def as_float(self) -> np.ndarray:
        if self.mode == "float":
            return self.states
        return np.array([[float(int(v.p)) / float(int(v.q)) if abs(int(v.q)) < 1 << 1000 else float(Fraction(int(v.p), int(v.q))) for v in s] for s in self.states])

    def series(self) -> np.ndarray:
        """``x_n`` for n = -2, ..., steps + 1 reconstructed from the windows."""
        arr = self.as_float()
        return np.concatenate([arr[0, ::-1], arr[1:, 0]])

    def summary(self) -> dict:
        arr = self.as_float()
        return {
            "label": self.label,
            "mode": self.mode,
            "steps": self.steps,
            "status": self.status,
            "diagnostic": self.diagnostic,
            "max_abs": float(np.max(np.abs(arr))) if arr.size else 0.0,
            "final_state": [float(v) for v in arr[-1]],
            **self.meta,
        }


def _bits(v: flint.fmpq) -> int:
    return max(int(v.p).bit_length(), int(v.q).bit_length())


def iterate(m: AdditiveMap, s0, n_steps: int, mode: str = "float", direction: int = 1) -> Orbit:
    """Orbit of ``n_steps`` steps; singular steps end it early with a diagnostic."""
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    if mode == "float":
        nc, ne, dc, de = m._fw if direction > 0 else m._bw
        arr, done, status = kernels.iterate(nc, ne, dc, de, np.asarray(s0, dtype=np.float64), n_steps, direction, POLE_TOL)
        st = {0: "ok", 1: "singular", 2: "overflow"}[status]
        diag = "" if status == 0 else f"stopped after {done} steps: {st}"
        return Orbit(arr, "float", done, st, diag, m.label)
    if mode != "exact":
        raise ValueError(f"unknown mode {mode!r}")
    expr = m.forward if direction > 0 else m.backward
    s = tuple(_to_fmpq(v) for v in s0)
    states = [s]
    status, diag = "ok", ""
    for k in range(n_steps):
        try:
            s = _step_exact(expr, s, direction)
        except SingularStep as exc:
            status, diag = "singular", f"stopped after {k} steps: {exc}"
            break
        states.append(s)
        if max(_bits(v) for v in s) > BIT_LIMIT:
            status, diag = "bit-limit", f"stopped after {k + 1} steps: numerator exceeds {BIT_LIMIT} bits"
            break
    return Orbit(states, "exact", len(states) - 1, status, diag, m.label)


# Jacobian and volume -------------------------------------------------------


def map_jacobian_symbolic(m: AdditiveMap) -> list:
    top = [m.forward.diff(v) for v in WINDOW]
    one, zero = const(1), const(0)
    return [top, [one, zero, zero, zero], [zero, one, zero, zero], [zero, zero, one, zero]]


def jacobian_det_symbolic(m) -> RationalExpr:
    """Determinant of the differential of the forward window map."""
    if isinstance(m, RationalExpr):
        x2 = forward_map(m)
        top = [x2.diff(v) for v in WINDOW]
        one, zero = const(1), const(0)
        return det([top, [one, zero, zero, zero], [zero, one, zero, zero], [zero, zero, one, zero]])
    return det(map_jacobian_symbolic(m))


def expected_jacobian(m: AdditiveMap) -> RationalExpr:
    """``lam^2 g(x-1) / g(x1)``."""
    return m.lam2 * m.g_at(XM1) / m.g_at(X1)


class _Grad:
    def __init__(self, m: AdditiveMap):
        self.f = [compile_float(m.forward.diff(v), WINDOW) for v in WINDOW]

    def matrix(self, s) -> np.ndarray:
        J = np.zeros((4, 4))
        J[0] = [f(s) for f in self.f]
        J[1, 0] = J[2, 1] = J[3, 2] = 1.0
        return J


def jacobian_det(m: AdditiveMap, s) -> float:
    """Numeric determinant of the 4x4 map differential at ``s``."""
    try:
        return float(np.linalg.det(_Grad(m).matrix([float(v) for v in s])))
    except PoleError as exc:
        raise SingularStep(str(exc)) from exc


def finite_difference_det(m: AdditiveMap, s, eps: float = 1e-6) -> float:
    s = np.asarray(s, dtype=np.float64)
    J = np.zeros((4, 4))
    for k in range(4):
        d = np.zeros(4)
        d[k] = eps * max(1.0, abs(s[k]))
        J[:, k] = (np.array(step_forward(m, s + d)) - np.array(step_forward(m, s - d))) / (2 * d[k])
    return float(np.linalg.det(J))


def volume_series(orbit: Orbit, m: AdditiveMap) -> np.ndarray:
    """``V_n = g(x0) g(x-1)`` times the coordinate volume carried along the orbit.

    The carried volume is the product of numeric Jacobian determinants, so
    ``V_n = lam^(2n) V_0`` is a checkable consequence rather than an input.
    """
    arr = orbit.as_float()
    rho = compile_float(m.g_at(X0) * m.g_at(XM1), WINDOW)
    grad = _Grad(m)
    out = np.empty(len(arr))
    carried = 1.0
    for n, s in enumerate(arr):
        out[n] = rho(list(s)) * carried
        if n + 1 < len(arr):
            carried *= np.linalg.det(grad.matrix(list(s)))
    return out


def volume_law_deviation(orbit: Orbit, m: AdditiveMap) -> float:
    """``max_n |V_n / (lam^(2n) V_0) - 1|``."""
    V = volume_series(orbit, m)
    lam2 = float(m.lam2.constant_value())
    expect = V[0] * lam2 ** np.arange(len(V))
    return float(np.max(np.abs(V / expect - 1.0)))


# invariant drift -----------------------------------------------------------


def evaluate_on_orbit(F: RationalExpr, orbit: Orbit):
    if orbit.mode == "exact":
        return [F.evaluate_fmpq(dict(zip(WINDOW, s))) for s in orbit.states]
    nc, ne, dc, de = kernels.sparse_rational(F, WINDOW)
    return kernels.rational_eval(nc, ne, dc, de, np.ascontiguousarray(orbit.states))


def drift_report(orbit: Orbit, invariants: Mapping[str, RationalExpr]) -> dict:
    """Per invariant: max deviation from the initial value (relative in float mode)."""
    out = {}
    for name, F in invariants.items():
        vals = evaluate_on_orbit(F, orbit)
        if orbit.mode == "exact":
            dev = [v - vals[0] for v in vals]
            out[name] = {"exact_zero": all(d == 0 for d in dev), "max_abs": str(max((abs(d) for d in dev), default=0))}
        else:
            v = np.asarray(vals)
            scale = abs(v[0]) if v[0] != 0 else 1.0
            out[name] = {"initial": float(v[0]), "max_relative": float(np.max(np.abs(v - v[0])) / scale)}
    return out


# Figure 1 ------------------------------------------------------------------


def figure1(steps: int = 10_000, x: float = 1e-2, lam=FIGURE1_LAMBDA) -> dict:
    """Conservative and dissipative case-1 orbits from the same initial window."""
    a, b, c = FIGURE1_PARAMS
    s0 = (x, x, x, x)
    cons = canonical_map(1, a, b, c)
    diss = dissipative_map(1, a, b, c, lam)
    return {
        "params": {"alpha": str(a), "beta": str(b), "gamma": str(c), "lambda": str(lam)},
        "initial": s0,
        "conservative": (cons, iterate(cons, s0, steps)),
        "dissipative": (diss, iterate(diss, s0, steps)),
    }


def orbit_table(orbit: Orbit, m: AdditiveMap, invariants: Optional[Sequence[RationalExpr]] = None) -> list:
    """Rows ``n, x1, x0, xm1, xm2, I, J, V_n`` (invariant columns blank when not given)."""
    arr = orbit.as_float()
    I_vals = J_vals = None
    if invariants:
        fl = Orbit(np.ascontiguousarray(arr), "float", orbit.steps)
        I_vals = evaluate_on_orbit(invariants[0], fl)
        J_vals = evaluate_on_orbit(invariants[1], fl) if len(invariants) > 1 else None
    V = volume_series(orbit, m) if m.g is not None else None
    rows = []
    for n, s in enumerate(arr):
        rows.append(
            [n, *map(float, s),
             "" if I_vals is None else float(I_vals[n]),
             "" if J_vals is None else float(J_vals[n]),
             "" if V is None else float(V[n])]
        )
    return rows


CSV_COLUMNS = ("n", "x1", "x0", "xm1", "xm2", "I", "J", "V_n")


def write_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        w.writerows(rows)


def phase_pairs(orbit: Orbit) -> np.ndarray:
    """``(x_n, x_{n+1})`` pairs along the orbit."""
    x = orbit.series()
    return np.stack([x[:-1], x[1:]], axis=1)


def canonical_invariants(case: int, alpha, beta, gamma) -> dict:
    I, J = canonical_model(case, alpha, beta, gamma).invariants
    return {"I": I, "J": J}
