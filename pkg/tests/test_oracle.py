from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from atvkit.errors import NotProbability, TooLarge
from atvkit.generate import random_pair
from atvkit.oracle import (
    Infeasible,
    RationalLP,
    Unbounded,
    as_fraction,
    bicausal_lp,
    classical_ot_lp,
    enumerate_vertices,
    independent_rows,
    rational_path_measure,
    solve_lp,
)


def test_as_fraction():
    assert as_fraction(0.1) == Fraction(1, 10)
    assert as_fraction(3) == Fraction(3)
    assert as_fraction(Fraction(2, 7)) == Fraction(2, 7)


def test_small_lp_and_errors():
    # min -x - y s.t. x + y + s = 1
    lp = RationalLP([-1, -2, 0], [[1, 1, 1]], [1])
    assert solve_lp(lp).value == -2
    with pytest.raises(Infeasible):
        solve_lp(RationalLP([0, 0], [[1, 1], [1, 1]], [1, 2]))
    with pytest.raises(Unbounded):
        solve_lp(RationalLP([-1, 0], [[1, -1]], [0]))


def test_dependent_rows_removed():
    A, b = independent_rows([[1, 1], [2, 2], [1, 0]], [Fraction(1), Fraction(2), Fraction(0)])
    assert len(A) == 2


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32))
def test_simplex_matches_vertex_enumeration(seed):
    rng = np.random.default_rng(seed)
    m, n = int(rng.integers(1, 4)), int(rng.integers(3, 7))
    A = rng.integers(-2, 4, size=(m, n)).tolist()
    x = rng.integers(0, 3, size=n)
    b = (np.array(A) @ x).tolist()
    c = rng.integers(0, 6, size=n).tolist()
    assert solve_lp(RationalLP(c, A, b)).value == enumerate_vertices(RationalLP(c, A, b)).value


def test_classical_examples():
    assert classical_ot_lp([1], [1], [[Fraction(7, 3)]]) == Fraction(7, 3)
    half = [Fraction(1, 2)] * 2
    assert classical_ot_lp(half, half, [[0, 1], [1, 0]]) == 0
    with pytest.raises(NotProbability):
        classical_ot_lp([1], [Fraction(1, 2)], [[0]])
    with pytest.raises(TooLarge):
        classical_ot_lp([Fraction(1, 21)] * 21, [Fraction(1, 20)] * 20, lambda i, j: 0)


def test_bicausal_examples():
    mu = {("0",): Fraction(1, 3), ("1",): Fraction(2, 3)}
    nu = {("0",): Fraction(1, 2), ("1",): Fraction(1, 2)}
    cost = lambda x, y: abs(int(x[0]) - int(y[0]))
    assert bicausal_lp(mu, nu, cost) == classical_ot_lp(mu, nu, cost) == Fraction(1, 6)
    pair = random_pair(3, 2, 2, "equal", denominator=10)
    assert bicausal_lp(pair.mu, pair.nu, lambda x, y: int(x != y)) == 0


def test_bicausal_solution_is_bicausal():
    from atvkit.adapted import Coupling, check_bicausal

    pair = random_pair(8, 2, 2, "independent", denominator=10)
    value, sol = bicausal_lp(pair.mu, pair.nu, lambda x, y: int(x != y), with_solution=True)
    pi = Coupling({k: float(v) for k, v in sol.items()}, 2)
    assert check_bicausal(pi, pair.mu, pair.nu).ok
    assert sum(v * (x != y) for (x, y), v in sol.items()) == value


@pytest.mark.parametrize("seed", range(6))
def test_bicausal_dominates_classical(seed):
    pair = random_pair(seed, 2, 2, "independent" if seed % 2 else "singular", denominator=10)
    cost = lambda x, y: sum(abs(int(a) - int(b)) for a, b in zip(x, y))
    assert bicausal_lp(pair.mu, pair.nu, cost) >= classical_ot_lp(pair.mu, pair.nu, cost)


def test_rational_path_measure():
    pair = random_pair(1, 2, 3, "tilt", denominator=10)
    exact = rational_path_measure(pair.mu)
    assert sum(exact.values()) == 1
    for x, m in exact.items():
        assert float(m) == pytest.approx(pair.mu.path_measure()[x], abs=1e-15)
