"""The seven-parameter family of additive Lagrangian equations with a
multi-affine invariant, its two invariants, and invariance certification.

Parameters are ``A1, A2, A3, A5, A6, A7, A8``; the family has

    g(xi) = A1 xi^2 + A2 xi + A3
    V(xi, eta) = W(eta) + A1/2 xi^2 eta^2 + A2 xi^2 eta + A2 xi eta^2 + A7 xi eta
"""

from __future__ import annotations

import os
import random
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional

import flint

from .expr import ExprError, RationalExpr, const, parse, sym, term_count
from .expr.closedform import integrate
from .lagrangian import (
    ETA,
    X0,
    X1,
    X2,
    XI,
    XM1,
    XM2,
    DiscreteLagrangian,
    additive_form,
    euler_lagrange_from_partials,
    reconstruct_V,
)

PARAMS = ("A1", "A2", "A3", "A5", "A6", "A7", "A8")
WINDOW = (X1, X0, XM1, XM2)
DEFAULT_TERM_BUDGET = 400_000


def term_budget() -> int:
    return int(os.environ.get("ADDLAG_TERM_BUDGET", DEFAULT_TERM_BUDGET))


def _A(values: Optional[Mapping] = None) -> dict:
    """Parameter symbols, optionally replaced by given values."""
    out = {p: sym(p) for p in PARAMS}
    if values:
        for k, v in values.items():
            if k not in out:
                raise ExprError(f"unknown family parameter {k}")
            out[k] = v if isinstance(v, RationalExpr) else const(Fraction(v))
    return out


def g_poly(values=None, var: str = XI) -> RationalExpr:
    A = _A(values)
    x = sym(var)
    return A["A1"] * x * x + A["A2"] * x + A["A3"]


def W_prime(values=None, var: str = ETA) -> RationalExpr:
    A = _A(values)
    e = sym(var)
    num = (
        A["A2"] ** 2 * e ** 3
        + (A["A2"] * A["A3"] + A["A2"] * A["A7"]) * e ** 2
        + (A["A2"] * A["A8"] + A["A3"] ** 2 + A["A6"]) * e
        + A["A3"] * A["A8"]
        + A["A5"]
    )
    return num / g_poly(values, var)


def V_gradient(values=None):
    """``(dV/deta, dV/dxi)`` in the placeholders ``xi, eta``."""
    A = _A(values)
    xi, eta = sym(XI), sym(ETA)
    V_eta = W_prime(values) + A["A1"] * xi ** 2 * eta + A["A2"] * xi ** 2 + 2 * A["A2"] * xi * eta + A["A7"] * xi
    V_xi = A["A1"] * xi * eta ** 2 + 2 * A["A2"] * xi * eta + A["A2"] * eta ** 2 + A["A7"] * eta
    return V_eta, V_xi


def family_lagrangian(values=None, closed_form: bool = True) -> DiscreteLagrangian:
    V_eta, V_xi = V_gradient(values)
    V = reconstruct_V(V_eta, V_xi) if closed_form else None
    return DiscreteLagrangian(g_poly(values), const(1), V_eta, V_xi, V)


def family_equation(values=None) -> RationalExpr:
    """Euler-Lagrange equation of the family Lagrangian."""
    return family_lagrangian(values, closed_form=False).euler_lagrange()


def family_equation_printed(values=None) -> RationalExpr:
    """The general equation exactly as printed (including the placement of A3*A8)."""
    A = _A(values)
    x2, x1, x0, xm1, xm2 = (sym(v) for v in (X2, X1, X0, XM1, XM2))
    g = lambda v: A["A1"] * v * v + A["A2"] * v + A["A3"]  # noqa: E731
    last = (
        A["A2"] ** 2 * x0 ** 3
        + (A["A2"] * A["A3"] + A["A2"] * A["A7"]) * x0 ** 2
        + (A["A2"] * A["A8"] + A["A3"] ** 2 + A["A3"] * A["A8"] + A["A6"]) * x0
        + A["A5"]
    ) / g(x0)
    return (
        g(xm1) * xm2
        + g(x1) * x2
        + (A["A1"] * x0 + A["A2"]) * (x1 ** 2 + xm1 ** 2)
        + (2 * A["A1"] * x0 + A["A2"]) * xm1 * x1
        + (2 * A["A2"] * x0 + A["A7"]) * (x1 + xm1)
        + last
    )


# invariants ----------------------------------------------------------------


def invariant_I(values=None) -> RationalExpr:
    A = _A(values)
    x1, x0, xm1, xm2 = (sym(v) for v in WINDOW)
    g0, gm1 = g_poly(values, X0), g_poly(values, XM1)
    A1, A2, A3, A5, A6, A7, A8 = (A[p] for p in PARAMS)
    P1 = -x0 * g0 * gm1
    P2 = -xm1 * g0 * gm1
    P3 = g0 * gm1
    P4 = (
        -xm1 ** 2 * g0 * ((A1 * x0 + A2) * xm1 + (2 * A2 * x0 + A7))
        - ((A1 * A3 + A2 ** 2) * x0 ** 3 + A2 * (2 * A3 + A7) * x0 ** 2 + (A2 * A8 + 2 * A3 ** 2 + A6) * x0 + A3 * A8 + A5) * xm1
        - x0 * (A2 * A3 * x0 ** 2 + A3 * A7 * x0 + A3 * A8 + A5)
    )
    return x1 * P1 + xm2 * P2 + x1 * xm2 * P3 + P4


def Q_poly(values=None, a: str = XI, b: str = ETA) -> RationalExpr:
    A = _A(values)
    A1, A2, A3, A5, A6, A7, A8 = (A[p] for p in PARAMS)
    xi, eta = sym(a), sym(b)
    return (
        2 * A1 ** 3 * eta ** 2 * xi ** 3
        + 4 * A1 ** 2 * A2 * eta ** 2 * xi ** 2
        + 3 * A1 ** 2 * A2 * eta * xi ** 3
        + 2 * A1 ** 2 * A3 * eta ** 2 * xi
        - 5 * A1 ** 2 * A3 * eta * xi ** 2
        + 2 * A1 * A2 ** 2 * eta ** 2 * xi
        + A1 * A2 ** 2 * eta * xi ** 2
        + A1 * A2 ** 2 * xi ** 3
        + 2 * A1 * A2 * A3 * eta ** 2
        - 2 * A1 * A2 * A3 * eta * xi
        + A1 * A2 * A3 * xi ** 2
        + A1 * A2 * A7 * xi ** 2
        - 2 * A2 ** 3 * eta * xi
        + A1 * A2 * A8 * xi
        - 5 * A1 * A3 ** 2 * eta
        + A1 * A3 ** 2 * xi
        - 2 * A2 ** 2 * A3 * eta
        + A1 * A3 * A8
        + A1 * A6 * xi
        + A1 * A5
    )


def R_poly(values=None, a: str = XI, b: str = ETA) -> RationalExpr:
    A = _A(values)
    A1, A2, A3, A5, A6, A7, A8 = (A[p] for p in PARAMS)
    xi, eta = sym(a), sym(b)
    c_xi2 = 5 * A1 * A3 ** 2 * A7 + A1 * A3 * A7 ** 2 + 2 * A2 ** 2 * A3 * A7 - A1 * A2 * A5 - A1 * A2 * A3 * A8 - A1 * A3 ** 3
    c_e2x2 = (
        5 * A1 ** 2 * A3 * A7 + A1 ** 2 * A7 ** 2 + 6 * A1 * A2 ** 2 * A3 + 2 * A1 * A2 ** 2 * A7
        + 4 * A2 ** 4 - A1 ** 2 * A6 - A1 ** 2 * A2 * A8 - 3 * A1 ** 2 * A3 ** 2
    )
    c_ex2 = (
        7 * A1 * A2 * A3 ** 2 + 6 * A1 * A2 * A3 * A7 + A1 * A2 * A7 ** 2 + 4 * A2 ** 3 * A3 + 2 * A2 ** 3 * A7
        - A1 ** 2 * A5 - A1 * A2 * A6 - A1 ** 2 * A3 * A8 - A1 * A2 ** 2 * A8
    )
    c_e2x = (
        7 * A1 * A2 * A3 ** 2 + 6 * A1 * A2 * A3 * A7 + A1 * A2 * A7 ** 2 + 4 * A2 ** 3 * A3
        + 2 * A2 ** 3 * A7 - A1 ** 2 * A5 - A1 * A2 * A6 - A1 ** 2 * A3 * A8 - A1 * A2 ** 2 * A8
    )
    c_ex = (
        3 * A1 * A2 * A3 * A8 + A1 * A2 * A7 * A8 + 10 * A1 * A3 ** 3 + A1 * A3 ** 2 * A7
        + 2 * A2 ** 3 * A8 + 4 * A2 ** 2 * A3 ** 2 - 2 * A1 * A2 * A5
        + 5 * A1 * A3 * A6 + A1 * A6 * A7 + 2 * A2 ** 2 * A6
    )
    return (
        -A1 * A2 ** 2 * A3 * xi ** 4
        - A1 ** 4 * xi ** 4 * eta ** 4
        - 3 * A1 ** 3 * A2 * xi ** 4 * eta ** 3
        - A1 ** 2 * (A1 * A3 + 3 * A2 ** 2) * eta ** 2 * xi ** 4
        - A2 * A1 * (2 * A1 * A3 + A2 ** 2) * eta * xi ** 4
        + A2 * A3 * (5 * A1 * A3 + 2 * A2 ** 2) * xi ** 3
        - 3 * A1 ** 3 * A2 * xi ** 3 * eta ** 4
        + A1 ** 2 * (5 * A1 * A3 - 4 * A2 ** 2) * eta ** 3 * xi ** 3
        + A2 * A1 * (7 * A1 * A3 + A2 ** 2) * eta ** 2 * xi ** 3
        + (5 * A1 ** 2 * A3 ** 2 + 4 * A1 * A2 ** 2 * A3 + 2 * A2 ** 4) * eta * xi ** 3
        + c_xi2 * xi ** 2
        - A1 ** 2 * (A1 * A3 + 3 * A2 ** 2) * eta ** 4 * xi ** 2
        + A2 * A1 * (7 * A1 * A3 + A2 ** 2) * eta ** 3 * xi ** 2
        + c_e2x2 * eta ** 2 * xi ** 2
        + c_ex2 * eta * xi ** 2
        + (A3 * A8 + A5) * (4 * A1 * A3 + A1 * A7 + 2 * A2 ** 2) * xi
        - A2 * A1 * (2 * A1 * A3 + A2 ** 2) * eta ** 4 * xi
        + (5 * A1 ** 2 * A3 ** 2 + 4 * A1 * A2 ** 2 * A3 + 2 * A2 ** 4) * eta ** 3 * xi
        + c_e2x * eta ** 2 * xi
        + c_ex * eta * xi
        - A1 * A2 ** 2 * A3 * eta ** 4
        + A2 * A3 * (5 * A1 * A3 + 2 * A2 ** 2) * eta ** 3
        + c_xi2 * eta ** 2
        + (A3 * A8 + A5) * (4 * A1 * A3 + A1 * A7 + 2 * A2 ** 2) * eta
    )


def invariant_J(values=None, variant: str = "printed") -> RationalExpr:
    """Second invariant.

    ``variant="printed"`` is the transcription as printed:
    ``-A1 g0^2 g-1^2 (x1^2 + x-2^2)`` leading term and ``Q(x0, x-1) x[0]``.
    ``variant="corrected"`` uses ``-A1 g0 g-1 (g0 x1^2 + g-1 x-2^2)`` and
    ``Q(x0, x-1) x[-2]``, the form that is homogeneous of weight 8 and
    symmetric under ``x[k] -> x[-1-k]``.
    """
    A = _A(values)
    A1, A2, A3, A7 = A["A1"], A["A2"], A["A3"], A["A7"]
    x1, x0, xm1, xm2 = (sym(v) for v in WINDOW)
    g0, gm1 = g_poly(values, X0), g_poly(values, XM1)
    Qa = Q_poly(values, XM1, X0)
    Qb = Q_poly(values, X0, XM1)
    if variant == "printed":
        lead = -A1 * g0 ** 2 * gm1 ** 2 * (x1 ** 2 + xm2 ** 2)
        last = x0
    elif variant == "corrected":
        lead = -A1 * g0 * gm1 * (g0 * x1 ** 2 + gm1 * xm2 ** 2)
        last = xm2
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return (
        lead
        - g0 * gm1 * (2 * A1 ** 2 * x0 * xm1 + A1 * A2 * x0 + A1 * A2 * xm1 + 5 * A1 * A3 + 2 * A1 * A7 + 2 * A2 ** 2) * x1 * xm2
        - g0 * Qa * x1
        - gm1 * Qb * last
        + R_poly(values, X0, XM1)
    )


# invariance ----------------------------------------------------------------


def forward_map(equation: RationalExpr) -> RationalExpr:
    """Solve ``equation = 0`` for ``x[2]`` as a function of the window."""
    raw = additive_form(equation)
    return -(raw.B * sym(XM2) + raw.C) / raw.A


def push_forward(F: RationalExpr, x2_value: RationalExpr) -> RationalExpr:
    """``F`` composed with the map: ``(x1, x0, x-1, x-2) -> (x2, x1, x0, x-1)``."""
    shifted = F.shift(1)
    return shifted.subs({X2: x2_value})


@dataclass
class InvarianceCertificate:
    invariant: bool
    method: str  # "symbolic" | "sampled"
    residual: Optional[str] = None
    samples: int = 0
    seconds: float = 0.0
    notes: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "invariant": self.invariant,
            "method": self.method,
            "residual": self.residual,
            "samples": self.samples,
            "seconds": round(self.seconds, 3),
            "notes": self.notes,
        }


class BudgetExceeded(RuntimeError):
    pass


def _budgeted(e: RationalExpr, budget: int) -> RationalExpr:
    if term_count(e) > budget:
        raise BudgetExceeded(f"{term_count(e)} terms exceed the budget of {budget}")
    return e


def check_invariance(
    F: RationalExpr,
    equation: RationalExpr,
    budget: Optional[int] = None,
    samples: int = 200,
    seed: int = 0,
    force_sampling: bool = False,
) -> InvarianceCertificate:
    """Certify ``F(next window) = F(window)`` along ``equation = 0``.

    Tries exact symbolic simplification first; if the expression swell
    exceeds ``budget`` terms it falls back to exact evaluation at
    ``samples`` random rational points (including random parameter values).
    """
    budget = term_budget() if budget is None else budget
    t0 = time.perf_counter()
    x2 = forward_map(equation)
    if not force_sampling:
        try:
            _budgeted(x2, budget)
            moved = _budgeted(push_forward(F, x2), budget)
            diff = moved - F
            cert = InvarianceCertificate(diff.is_zero(), "symbolic", None if diff.is_zero() else str(diff)[:2000])
            cert.seconds = time.perf_counter() - t0
            return cert
        except BudgetExceeded as exc:
            note = f"symbolic route abandoned: {exc}"
        else:
            note = None
    else:
        note = "sampling requested"
    cert = sampled_invariance(F, x2, samples=samples, seed=seed)
    if note:
        cert.notes.append(note)
    cert.seconds = time.perf_counter() - t0
    return cert


def sampled_invariance(F: RationalExpr, x2: RationalExpr, samples: int = 200, seed: int = 0) -> InvarianceCertificate:
    """Exact rational evaluation of ``F(map(p)) - F(p)`` at random points ``p``."""
    rng = random.Random(seed)
    free = sorted((F.free_symbols() | x2.free_symbols()) - {X2})
    done = 0
    attempts = 0
    while done < samples:
        attempts += 1
        if attempts > 20 * samples:
            raise RuntimeError("could not find enough regular sample points")
        pt = {v: flint.fmpq(rng.randint(-40, 40), rng.randint(1, 12)) for v in free}
        try:
            nxt = x2.evaluate_fmpq(pt)
            before = F.evaluate_fmpq(pt)
            moved_pt = {X1: nxt, X0: pt.get(X1, flint.fmpq(0)), XM1: pt.get(X0, flint.fmpq(0)), XM2: pt.get(XM1, flint.fmpq(0))}
            moved_pt.update({k: v for k, v in pt.items() if not k.startswith("x[")})
            after = F.evaluate_fmpq(moved_pt)
        except ZeroDivisionError:
            continue
        if after != before:
            return InvarianceCertificate(False, "sampled", f"F changes by {after - before} at {pt}", done)
        done += 1
    return InvarianceCertificate(True, "sampled", None, done)


def Qpol_Rpol(values=None):
    return Q_poly(values), R_poly(values)
