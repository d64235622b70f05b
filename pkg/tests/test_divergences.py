import math

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from atvkit.adapted import Coupling
from atvkit.divergences import (
    adapted_prefactor,
    adapted_rhs,
    bv_rhs,
    corollary_rhs_p,
    entropy_chain_terms,
    log_exp_moment,
    relative_entropy,
    weighted_tv,
)
from atvkit.errors import InvalidParameter, SpaceMismatch
from atvkit.generate import random_pair
from atvkit.process_law import (
    PathMetric,
    ProcessLaw,
    WeightFunction,
    dirac,
    meet,
    product_law,
    residual_parts,
)

from conftest import MU_JOINT, NU_JOINT

mpmath.mp.dps = 50
VALUES = {"a": 0, "b": 1, "c": 2}


def exact_entropy(nu_joint, mu_joint):
    return sum(mpmath.mpf(q.numerator) / q.denominator
               * mpmath.log(mpmath.mpf((q / mu_joint[k]).numerator) / (q / mu_joint[k]).denominator)
               for k, q in nu_joint.items())


def test_entropy_examples():
    mu = ProcessLaw({(): {"a": 0.25, "b": 0.75}}, 1)
    assert relative_entropy(mu, mu) == 0.0
    assert relative_entropy(ProcessLaw({(): {"a": 1.0}}, 1), mu) == pytest.approx(1.386294, abs=1e-6)
    assert relative_entropy(ProcessLaw({(): {"a": 1.0}}, 1), mu) == pytest.approx(math.log(4), rel=1e-15)
    assert relative_entropy(ProcessLaw({(): {"c": 1.0}}, 1), mu) == math.inf


def test_entropy_fixture_against_high_precision(fixture_mu, fixture_nu):
    exact = exact_entropy(NU_JOINT, MU_JOINT)
    assert relative_entropy(fixture_nu, fixture_mu) == pytest.approx(float(exact), rel=1e-14)


def test_chain_terms_examples(fixture_mu, fixture_nu):
    assert entropy_chain_terms(fixture_mu, fixture_mu) == [0.0, 0.0]
    terms = entropy_chain_terms(fixture_nu, fixture_mu)
    assert abs(math.fsum(terms) - 2 * relative_entropy(fixture_nu, fixture_mu)) <= 1e-10
    m1 = [{"0": 0.3, "1": 0.7}, {"0": 0.5, "1": 0.5}]
    n1 = [{"0": 0.6, "1": 0.4}, {"0": 0.9, "1": 0.1}]
    terms = entropy_chain_terms(product_law(n1), product_law(m1))
    for t in range(2):
        single = relative_entropy(ProcessLaw({(): n1[t]}, 1), ProcessLaw({(): m1[t]}, 1))
        assert terms[t] == pytest.approx(2 * single, rel=1e-14)


def test_chain_terms_infinite_branch():
    mu = ProcessLaw({(): {"a": 1.0}, ("a",): {"x": 1.0}}, 2)
    nu = ProcessLaw({(): {"a": 1.0}, ("a",): {"x": 0.5, "y": 0.5}}, 2)
    assert entropy_chain_terms(nu, mu) == [0.0, math.inf]
    assert relative_entropy(nu, mu) == math.inf


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 4), st.sampled_from(["tilt", "independent"]))
def test_chain_rule_on_random_pairs(seed, T, mode):
    pair = random_pair(seed, T, 2 + seed % 2, mode)
    terms = entropy_chain_terms(pair.nu, pair.mu)
    assert abs(math.fsum(terms) - 2 * relative_entropy(pair.nu, pair.mu)) <= 1e-10


def test_weighted_tv_examples(fixture_mu):
    phi = WeightFunction.rule(1.0, 1.0, PathMetric.for_laws(fixture_mu))
    assert weighted_tv(fixture_mu, fixture_mu, phi) == 0.0
    x, y = dirac(("a", "b")), dirac(("b", "c"))
    assert weighted_tv(x, y, phi) == pytest.approx(phi(("a", "b")) + phi(("b", "c")))
    assert weighted_tv(x, y, WeightFunction.constant(1.0)) == 2.0


def test_weighted_tv_equals_diagonal_plus_product_coupling(fixture_mu, fixture_nu):
    phi = WeightFunction.rule(1.0, 1.0, PathMetric.for_laws(fixture_mu))
    a, b = fixture_mu.path_measure(), fixture_nu.path_measure()
    pos, neg, _ = residual_parts(a, b)
    masses = {(x, x): m for x, m in meet(a, b).items()}
    for x, p in pos.items():
        for y, q in neg.items():
            masses[(x, y)] = masses.get((x, y), 0.0) + p * q / pos.total()
    pi = Coupling(masses, 2)
    assert pi.marginal_error(fixture_mu, fixture_nu) < 1e-15
    value = pi.integrate(lambda x, y: (phi(x) + phi(y)) * (x != y))
    assert weighted_tv(fixture_mu, fixture_nu, phi) == pytest.approx(value, rel=1e-14)


def test_log_exp_moment_examples(fixture_mu):
    assert log_exp_moment(fixture_mu, WeightFunction.constant(0.0)) == 0.0
    assert log_exp_moment(fixture_mu, WeightFunction.constant(3.0)) == pytest.approx(9.0, rel=1e-15)


@pytest.mark.parametrize("alpha, p", [(1.0, 1.0), (0.5, 2.0), (1.0, 2.0)])
def test_log_exp_moment_against_high_precision(fixture_mu, alpha, p):
    phi = WeightFunction.rule(alpha, p, PathMetric.for_laws(fixture_mu))
    total = mpmath.mpf(0)
    for (x1, x2), q in MU_JOINT.items():
        d = VALUES[x1] + VALUES[x2]
        total += mpmath.mpf(q.numerator) / q.denominator * mpmath.exp(mpmath.mpf(alpha) * d ** (2 * p))
    assert log_exp_moment(fixture_mu, phi) == pytest.approx(float(mpmath.log(total)), rel=1e-13)


def test_log_exp_moment_survives_large_exponents(fixture_mu):
    phi = WeightFunction.constant(40.0)
    assert log_exp_moment(fixture_mu, phi) == pytest.approx(1600.0, rel=1e-15)


def test_rhs_trivial_cases(fixture_mu, fixture_nu):
    one = WeightFunction.constant(1.0)
    assert bv_rhs(fixture_mu, fixture_mu, one) == 0.0
    assert adapted_rhs(fixture_mu, fixture_mu, one) == 0.0
    x, y = dirac(("a", "a")), dirac(("b", "c"))
    assert bv_rhs(x, y, one) == math.inf
    assert adapted_rhs(x, y, one) == math.inf
    assert corollary_rhs_p(x, y, 1.0, p=2, metric=PathMetric.for_laws(fixture_mu)) == math.inf


def test_adapted_prefactor():
    assert adapted_prefactor(4) == 5.0
    assert adapted_prefactor(1) == 3.0


def test_adapted_rhs_scales_bv(fixture_mu, fixture_nu):
    one = WeightFunction.constant(1.0)
    assert adapted_rhs(fixture_mu, fixture_nu, one) == pytest.approx(
        (2 * math.sqrt(2) + 1) * bv_rhs(fixture_mu, fixture_nu, one), rel=1e-15)


def test_corollary_p1_matches_adapted_t1(fixture_mu, fixture_nu):
    metric = PathMetric.for_laws(fixture_mu, fixture_nu)
    phi = WeightFunction.rule(1.0, 1.0, metric)
    assert corollary_rhs_p(fixture_mu, fixture_nu, 1.0, p=1.0) == pytest.approx(
        adapted_rhs(fixture_mu, fixture_nu, phi), rel=1e-15)
    assert corollary_rhs_p(fixture_mu, fixture_mu, 1.0, p=1.0) == 0.0


def test_corollary_p2_by_direct_summation(fixture_mu, fixture_nu):
    H = sum(float(q) * math.log(float(q / MU_JOINT[k])) for k, q in NU_JOINT.items())
    moment = sum(float(q) * math.exp((VALUES[x1] + VALUES[x2]) ** 4) for (x1, x2), q in MU_JOINT.items())
    expected = 2 * (2 * math.sqrt(2) + 1) * math.sqrt(1 + math.log(moment)) * math.sqrt(2 * H)
    assert corollary_rhs_p(fixture_mu, fixture_nu, 1.0, p=2.0) == pytest.approx(expected, rel=1e-12)


def test_corollary_parameter_errors(fixture_mu, fixture_nu):
    with pytest.raises(InvalidParameter):
        corollary_rhs_p(fixture_mu, fixture_nu, 0.0)
    with pytest.raises(InvalidParameter):
        corollary_rhs_p(fixture_mu, fixture_nu, 1.0, p=0.5)


def test_horizon_mismatch():
    with pytest.raises(SpaceMismatch):
        relative_entropy(dirac(("a",)), dirac(("a", "b")))
