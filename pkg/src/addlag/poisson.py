"""Poisson brackets of variational fourth-order maps from the discrete
Ostrogradsky chart, and the checks that certify Liouville integrability.

For ``L(x2, x1, x0)`` the chart on the window ``(x1, x0, x-1, x-2)`` is

    q1 = x0,  q2 = x1,
    p2 = T^-1 dL/dx2,
    p1 = T^-1 [dL/dx1 + T^-1 dL/dx2],

and the bracket is the pullback of the constant one with ``{p_i, q_j} = delta_ij``
(the sign convention under which the printed bracket tables come out).
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional

import flint

from .expr import ExprError, RationalExpr, const, sym, term_count
from .expr.closedform import ClosedForm
from .family import BudgetExceeded, forward_map, term_budget
from .lagrangian import X0, X1, X2, XM1, XM2, DiscreteLagrangian

INDICES = (1, 0, -1, -2)
NAMES = {1: X1, 0: X0, -1: XM1, -2: XM2}


@dataclass
class OstrogradskyChart:
    q1: RationalExpr
    q2: RationalExpr
    p1: RationalExpr
    p2: RationalExpr

    def coordinates(self) -> tuple:
        return (self.q1, self.q2, self.p1, self.p2)

    def jacobian(self) -> list:
        """Rows ``d(q1, q2, p1, p2) / d(x1, x0, x-1, x-2)``."""
        return [[c.diff(NAMES[i]) for i in INDICES] for c in self.coordinates()]


def _partials(L):
    if isinstance(L, DiscreteLagrangian):
        if not (L.lam.is_constant() and L.lam.constant_value() == 1):
            raise ExprError("the Ostrogradsky chart needs an autonomous Lagrangian (lambda = 1)")
        return L.partials()
    L = ClosedForm.lift(L)
    return L.diff_rational(X2), L.diff_rational(X1), L.diff_rational(X0)


def ostrogradsky_chart(L) -> OstrogradskyChart:
    """Chart of an autonomous Lagrangian ``L(x2, x1, x0)``.

    ``L`` is a :class:`DiscreteLagrangian` with ``lam = 1`` or an expression.
    It must be linear in ``x2`` so that no inversion of the map is needed.
    """
    d2, d1, _ = _partials(L)
    if X2 in d2.free_symbols():
        raise ExprError("Lagrangian is not linear in its top argument")
    p2 = d2.shift(-1)
    p1 = d1.shift(-1) + d2.shift(-2)
    return OstrogradskyChart(sym(X0), sym(X1), p1, p2)


# small exact linear algebra -----------------------------------------------


def _minor(m, r, c):
    return [row[:c] + row[c + 1:] for k, row in enumerate(m) if k != r]


def det(m) -> RationalExpr:
    """Determinant by cofactor expansion along the sparsest row."""
    n = len(m)
    if n == 1:
        return m[0][0]
    if n == 2:
        return m[0][0] * m[1][1] - m[0][1] * m[1][0]
    r = min(range(n), key=lambda k: sum(not e.is_zero() for e in m[k]))
    out = const(0)
    for c in range(n):
        if m[r][c].is_zero():
            continue
        term = m[r][c] * det(_minor(m, r, c))
        out = out + term if (r + c) % 2 == 0 else out - term
    return out


def inverse(m) -> list:
    d = det(m)
    if d.is_zero():
        raise ExprError("degenerate chart: Jacobian determinant vanishes identically")
    n = len(m)
    inv = d.inverse()
    return [[(det(_minor(m, c, r)) * inv) * (1 if (r + c) % 2 == 0 else -1) for c in range(n)] for r in range(n)]


# Poisson structures --------------------------------------------------------


@dataclass
class PoissonStructure:
    """``{x[i], x[j]}`` for ``i, j`` in the window ``(1, 0, -1, -2)``."""

    entries: dict

    def __getitem__(self, ij) -> RationalExpr:
        return self.entries[ij]

    def matrix(self) -> list:
        return [[self.entries[(i, j)] for j in INDICES] for i in INDICES]

    def nonzero(self) -> dict:
        """Upper-triangular nonzero entries, keyed ``(i, j)`` with ``i > j``."""
        return {(i, j): e for (i, j), e in self.entries.items() if i > j and not e.is_zero()}

    @staticmethod
    def from_table(table: dict) -> "PoissonStructure":
        entries = {(i, j): const(0) for i in INDICES for j in INDICES}
        for (i, j), e in table.items():
            entries[(i, j)] = e
            entries[(j, i)] = -e
        return PoissonStructure(entries)

    def as_dict(self) -> dict:
        return {f"{{x[{i}], x[{j}]}}": str(e) for (i, j), e in sorted(self.nonzero().items(), reverse=True)}


def poisson_from_chart(chart: OstrogradskyChart) -> PoissonStructure:
    """``P = D Omega D^T`` with ``D = d(x)/d(q, p)`` and ``{p_i, q_j} = delta_ij``."""
    D = inverse(chart.jacobian())
    omega = [[0, 0, -1, 0], [0, 0, 0, -1], [1, 0, 0, 0], [0, 1, 0, 0]]
    entries = {}
    for a, i in enumerate(INDICES):
        for b, j in enumerate(INDICES):
            acc = const(0)
            for k in range(4):
                for l in range(4):
                    w = omega[k][l]
                    if w and not D[a][k].is_zero() and not D[b][l].is_zero():
                        acc = acc + D[a][k] * D[b][l] * w
            entries[(i, j)] = acc
    return PoissonStructure(entries)


def poisson_from_lagrangian(L) -> PoissonStructure:
    return poisson_from_chart(ostrogradsky_chart(L))


def compare_tables(P: PoissonStructure, table: dict) -> dict:
    """Entrywise differences between ``P`` and a printed table (zeros included)."""
    ref = PoissonStructure.from_table(table)
    return {(i, j): P[(i, j)] - ref[(i, j)] for i in INDICES for j in INDICES if i > j}


def bracket(F: RationalExpr, G: RationalExpr, P: PoissonStructure) -> RationalExpr:
    dF = {i: F.diff(NAMES[i]) for i in INDICES}
    dG = {j: G.diff(NAMES[j]) for j in INDICES}
    out = const(0)
    for i in INDICES:
        if dF[i].is_zero():
            continue
        for j in INDICES:
            if i == j or dG[j].is_zero() or P[(i, j)].is_zero():
                continue
            out = out + dF[i] * dG[j] * P[(i, j)]
    return out


def is_skew(P: PoissonStructure) -> bool:
    return all((P[(i, j)] + P[(j, i)]).is_zero() for i in INDICES for j in INDICES)


def check_jacobi(P: PoissonStructure) -> dict:
    """Cyclic sums ``{{x_i, x_j}, x_k} + ...`` for every triple of window variables."""
    out = {}
    for i, j, k in combinations(INDICES, 3):
        xi, xj, xk = (sym(NAMES[v]) for v in (i, j, k))
        s = bracket(P[(i, j)], xk, P) + bracket(P[(j, k)], xi, P) + bracket(P[(k, i)], xj, P)
        out[(i, j, k)] = s
    return out


def map_components(equation: RationalExpr) -> dict:
    """The forward map on the window: new ``x[i]`` as functions of the old window."""
    x2 = forward_map(equation)
    return {1: x2, 0: sym(X1), -1: sym(X0), -2: sym(XM1)}


def _pushed(e: RationalExpr, x2: RationalExpr) -> RationalExpr:
    return e.shift(1).subs({X2: x2})


def check_preservation(P: PoissonStructure, equation: RationalExpr) -> dict:
    """``{phi_i, phi_j} - P_ij(phi)`` for the forward map ``phi``."""
    phi = map_components(equation)
    x2 = phi[1]
    out = {}
    for i in INDICES:
        for j in INDICES:
            if i > j:
                out[(i, j)] = bracket(phi[i], phi[j], P) - _pushed(P[(i, j)], x2)
    return out


def rank_certificate(P: PoissonStructure) -> RationalExpr:
    """``det P``; full rank when it is not identically zero."""
    return det(P.matrix())


@dataclass
class InvolutionCertificate:
    involutive: bool
    method: str
    residual: Optional[str] = None
    samples: int = 0
    seconds: float = 0.0
    notes: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "involutive": self.involutive,
            "method": self.method,
            "residual": self.residual,
            "samples": self.samples,
            "seconds": round(self.seconds, 3),
            "notes": self.notes,
        }


def _sampled_bracket(F, G, P, samples, seed) -> InvolutionCertificate:
    rng = random.Random(seed)
    dF = {i: F.diff(NAMES[i]) for i in INDICES}
    dG = {j: G.diff(NAMES[j]) for j in INDICES}
    free = set()
    for e in list(dF.values()) + list(dG.values()) + list(P.entries.values()):
        free |= e.free_symbols()
    free = sorted(free)
    done = attempts = 0
    while done < samples:
        attempts += 1
        if attempts > 20 * samples:
            raise RuntimeError("could not find enough regular sample points")
        pt = {v: flint.fmpq(rng.randint(-40, 40), rng.randint(1, 12)) for v in free}
        try:
            a = {i: dF[i].evaluate_fmpq(pt) for i in INDICES}
            b = {j: dG[j].evaluate_fmpq(pt) for j in INDICES}
            # every entry must be regular: a skipped 0 * pole term can have a finite limit
            p = {ij: e.evaluate_fmpq(pt) for ij, e in P.entries.items() if ij[0] != ij[1]}
        except ZeroDivisionError:
            continue
        total = flint.fmpq(0)
        for (i, j), v in p.items():
            total += a[i] * b[j] * v
        if total != 0:
            return InvolutionCertificate(False, "sampled", f"{{F, G}} = {total} at {pt}", done)
        done += 1
    return InvolutionCertificate(True, "sampled", None, done)


def check_involution(
    F: RationalExpr,
    G: RationalExpr,
    P: PoissonStructure,
    budget: Optional[int] = None,
    samples: int = 200,
    seed: int = 0,
    force_sampling: bool = False,
) -> InvolutionCertificate:
    """Certify ``{F, G} = 0``; exact sampling when the symbolic route is too large."""
    budget = term_budget() if budget is None else budget
    t0 = time.perf_counter()
    note = "sampling requested" if force_sampling else None
    if not force_sampling:
        try:
            if term_count(F) * term_count(G) > budget:
                raise BudgetExceeded(f"{term_count(F)} x {term_count(G)} terms exceed the budget of {budget}")
            r = bracket(F, G, P)
            cert = InvolutionCertificate(r.is_zero(), "symbolic", None if r.is_zero() else str(r)[:2000])
            cert.seconds = time.perf_counter() - t0
            return cert
        except BudgetExceeded as exc:
            note = f"symbolic route abandoned: {exc}"
    cert = _sampled_bracket(F, G, P, samples, seed)
    cert.notes.append(note)
    cert.seconds = time.perf_counter() - t0
    return cert
