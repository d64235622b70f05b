"""Exact rational linear programming for desk-scale adjudication.

Everything here runs on :class:`fractions.Fraction`. Floats are converted at
the boundary (:func:`as_fraction`), never inside a solve. The two entry
points build the transport LP over all couplings and over bicausal couplings
and solve it with a two-phase tableau simplex under Bland's rule.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

from .errors import NotProbability, TooLarge
from .process_law import ProcessLaw

MAX_VARIABLES = 400


def as_fraction(x, max_denominator: int = 10**9) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(x).limit_denominator(max_denominator)


@dataclass
class RationalLP:
    """``min c.x  s.t.  A x = b, x >= 0`` over the rationals."""

    c: list
    A: list
    b: list
    names: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.c)


class Infeasible(ArithmeticError):
    pass


class Unbounded(ArithmeticError):
    pass


@dataclass(frozen=True)
class LPSolution:
    value: Fraction
    x: tuple


def independent_rows(A: list, b: list) -> tuple[list, list]:
    """Row-reduce ``[A | b]`` and keep a basis of its row space.

    Raises :class:`Infeasible` when the system is inconsistent.
    """
    rows = [list(r) + [rhs] for r, rhs in zip(A, b)]
    n = len(A[0]) if A else 0
    out = []
    pivot_cols = []
    for row in rows:
        row = row[:]
        for prow, pc in zip(out, pivot_cols):
            f = row[pc]
            if f:
                row = [x - f * y for x, y in zip(row, prow)]
        lead = next((k for k in range(n) if row[k] != 0), None)
        if lead is None:
            if row[n] != 0:
                raise Infeasible("inconsistent equality constraints")
            continue
        inv = 1 / row[lead]
        row = [x * inv for x in row]
        # keep earlier rows reduced in the new pivot column
        for k, prow in enumerate(out):
            f = prow[lead]
            if f:
                out[k] = [x - f * y for x, y in zip(prow, row)]
        out.append(row)
        pivot_cols.append(lead)
    return [r[:n] for r in out], [r[n] for r in out]


def _pivot(tab: list, basis: list, r: int, col: int) -> None:
    prow = tab[r]
    inv = 1 / prow[col]
    prow = [x * inv for x in prow]
    tab[r] = prow
    for k, row in enumerate(tab):
        if k != r:
            f = row[col]
            if f:
                tab[k] = [x - f * y for x, y in zip(row, prow)]
    basis[r] = col


def _simplex(tab: list, basis: list, cost: list, allowed: int) -> None:
    """Bland-rule primal simplex on a tableau whose last column is the rhs.

    Only columns ``< allowed`` may enter. ``cost`` has one entry per column.
    """
    m = len(tab)
    while True:
        cb = [cost[j] for j in basis]
        entering = None
        for j in range(allowed):
            if j in basis:
                continue
            reduced = cost[j] - sum(cb[i] * tab[i][j] for i in range(m) if tab[i][j])
            if reduced < 0:
                entering = j
                break
        if entering is None:
            return
        best = None
        for i in range(m):
            a = tab[i][entering]
            if a > 0:
                ratio = tab[i][-1] / a
                key = (ratio, basis[i])
                if best is None or key < best[0]:
                    best = (key, i)
        if best is None:
            raise Unbounded("objective unbounded below")
        _pivot(tab, basis, best[1], entering)


def solve_lp(lp: RationalLP) -> LPSolution:
    """Two-phase simplex with Bland's rule, exact arithmetic."""
    c = [as_fraction(v) for v in lp.c]
    A = [[as_fraction(v) for v in row] for row in lp.A]
    b = [as_fraction(v) for v in lp.b]
    n = len(c)
    A, b = independent_rows(A, b)
    m = len(A)
    for i in range(m):
        if b[i] < 0:
            A[i] = [-x for x in A[i]]
            b[i] = -b[i]
    # phase 1: artificials n..n+m-1
    tab = [A[i] + [Fraction(int(k == i)) for k in range(m)] + [b[i]] for i in range(m)]
    basis = list(range(n, n + m))
    phase1 = [Fraction(0)] * n + [Fraction(1)] * m
    _simplex(tab, basis, phase1, n + m)
    if sum(tab[i][-1] for i in range(m) if basis[i] >= n) != 0:
        raise Infeasible("no feasible point")
    for i in range(m):
        if basis[i] >= n:
            col = next((j for j in range(n) if tab[i][j] != 0 and j not in basis), None)
            if col is None:
                raise ArithmeticError("dependent row survived elimination")
            _pivot(tab, basis, i, col)
    tab = [row[:n] + [row[-1]] for row in tab]
    _simplex(tab, basis, c + [Fraction(0)], n)
    x = [Fraction(0)] * n
    for i, j in enumerate(basis):
        x[j] = tab[i][-1]
    return LPSolution(value=sum(ci * xi for ci, xi in zip(c, x)), x=tuple(x))


def enumerate_vertices(lp: RationalLP, max_bases: int = 200_000) -> LPSolution:
    """Minimum over all basic feasible solutions, by brute force.

    Independent of :func:`solve_lp` apart from the row reduction; only for
    very small programs.
    """
    c = [as_fraction(v) for v in lp.c]
    A, b = independent_rows([[as_fraction(v) for v in r] for r in lp.A], [as_fraction(v) for v in lp.b])
    n, m = len(c), len(A)
    best = None
    for count, cols in enumerate(itertools.combinations(range(n), m)):
        if count >= max_bases:
            raise TooLarge(f"more than {max_bases} candidate bases")
        xb = _solve_square([[A[i][j] for j in cols] for i in range(m)], b)
        if xb is None or any(v < 0 for v in xb):
            continue
        x = [Fraction(0)] * n
        for j, v in zip(cols, xb):
            x[j] = v
        val = sum(ci * xi for ci, xi in zip(c, x))
        if best is None or val < best.value:
            best = LPSolution(val, tuple(x))
    if best is None:
        raise Infeasible("no basic feasible solution")
    return best


def _solve_square(M: list, rhs: list):
    k = len(M)
    aug = [row[:] + [r] for row, r in zip(M, rhs)]
    for col in range(k):
        piv = next((r for r in range(col, k) if aug[r][col] != 0), None)
        if piv is None:
            return None
        aug[col], aug[piv] = aug[piv], aug[col]
        inv = 1 / aug[col][col]
        aug[col] = [x * inv for x in aug[col]]
        for r in range(k):
            if r != col and aug[r][col]:
                f = aug[r][col]
                aug[r] = [x - f * y for x, y in zip(aug[r], aug[col])]
    return [aug[r][k] for r in range(k)]


# ---------------------------------------------------------------------------
# transport programs
# ---------------------------------------------------------------------------


def _as_measure(m) -> dict:
    if isinstance(m, ProcessLaw):
        return rational_path_measure(m)
    if isinstance(m, Mapping):
        return {k: as_fraction(v) for k, v in m.items() if v != 0}
    return {i: as_fraction(v) for i, v in enumerate(m) if v != 0}


def _cost_fn(cost) -> Callable:
    if callable(cost):
        return cost
    return lambda i, j: cost[i][j]


def transport_lp(mu: Mapping, nu: Mapping, cost: Callable) -> tuple[RationalLP, list]:
    xs, ys = list(mu), list(nu)
    if len(xs) * len(ys) > MAX_VARIABLES:
        raise TooLarge(f"{len(xs) * len(ys)} variables exceed the cap of {MAX_VARIABLES}")
    var = [(x, y) for x in xs for y in ys]
    A, b = [], []
    for x in xs:
        A.append([Fraction(int(v[0] == x)) for v in var])
        b.append(mu[x])
    for y in ys:
        A.append([Fraction(int(v[1] == y)) for v in var])
        b.append(nu[y])
    c = [as_fraction(cost(x, y)) for x, y in var]
    return RationalLP(c, A, b, var), var


def classical_ot_lp(mu, nu, cost, *, with_solution: bool = False):
    """Exact optimal transport value between two finite measures.

    ``mu`` and ``nu`` are sequences or mappings of rationals (or laws); ``cost``
    is a matrix indexed like them or a callable.
    """
    mu, nu = _as_measure(mu), _as_measure(nu)
    if sum(mu.values()) != sum(nu.values()):
        raise NotProbability("marginal masses differ")
    lp, var = transport_lp(mu, nu, _cost_fn(cost))
    sol = solve_lp(lp)
    if with_solution:
        return sol.value, {v: x for v, x in zip(var, sol.x) if x}
    return sol.value


def causality_rows(mu: Mapping, nu: Mapping, var: list) -> list:
    """Linear equalities expressing bicausality of a coupling of ``mu``, ``nu``.

    For each ``t < T``, each full ``x`` and each ``y_{1:t}``:
    ``mu(x_{1:t}) pi(x, y_{1:t}) = mu(x) pi(x_{1:t}, y_{1:t})``; symmetrically
    with the roles of ``x`` and ``y`` exchanged.
    """
    T = len(next(iter(mu)))
    rows = []
    for side in (0, 1):
        own, other = (mu, nu) if side == 0 else (nu, mu)
        prefix_mass: dict = {}
        for x, m in own.items():
            for t in range(1, T):
                prefix_mass[x[:t]] = prefix_mass.get(x[:t], Fraction(0)) + m
        for t in range(1, T):
            other_prefixes = sorted({y[:t] for y in other})
            for x, mx in own.items():
                for yp in other_prefixes:
                    row = []
                    for v in var:
                        vx, vy = (v[0], v[1]) if side == 0 else (v[1], v[0])
                        coef = Fraction(0)
                        if vy[:t] == yp:
                            if vx == x:
                                coef += prefix_mass[x[:t]]
                            if vx[:t] == x[:t]:
                                coef -= mx
                        row.append(coef)
                    if any(row):
                        rows.append(row)
    return rows


def bicausal_lp(mu, nu, cost: Callable, *, with_solution: bool = False):
    """Exact optimum of ``E_pi[cost(X, Y)]`` over bicausal couplings.

    ``mu`` and ``nu`` are laws or mappings ``full path -> rational``.
    """
    mu, nu = _as_measure(mu), _as_measure(nu)
    if sum(mu.values()) != sum(nu.values()):
        raise NotProbability("marginal masses differ")
    lp, var = transport_lp(mu, nu, cost)
    extra = causality_rows(mu, nu, var)
    lp.A.extend(extra)
    lp.b.extend([Fraction(0)] * len(extra))
    sol = solve_lp(lp)
    if with_solution:
        return sol.value, {v: x for v, x in zip(var, sol.x) if x}
    return sol.value


def rational_path_measure(law: ProcessLaw, max_denominator: int = 10**6) -> dict:
    """Exact path masses of a law whose kernel entries are small rationals.

    Raises :class:`NotProbability` if a converted kernel row does not sum to
    exactly one.
    """
    rows = {}
    for prefix, row in law.kernels.items():
        conv = {a: Fraction(p).limit_denominator(max_denominator) for a, p in row.items()}
        if sum(conv.values()) != 1:
            raise NotProbability(f"kernel at {prefix!r} is not a rational probability row")
        rows[prefix] = conv
    out = {(): Fraction(1)}
    for _ in range(law.horizon):
        out = {p + (a,): m * q for p, m in out.items() for a, q in rows[p].items()}
    return out
