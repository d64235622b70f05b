"""Acceptance suite: one test per criterion, each printing a pass/fail line."""

import csv
import io
import math
import os
import subprocess
import sys
import time

import pytest

from atvkit.adapted import atv_weighted, build_gamma, check_bicausal, nested_distance
from atvkit.cli import main
from atvkit.divergences import corollary_rhs_p, weighted_tv
from atvkit.generate import instance_seed, random_pair, suite_instance
from atvkit.harness import SCHEMA, oracle_compare_pair, random_transport_comparison
from atvkit.ot_core import wasserstein
from atvkit.process_law import PathMetric, WeightFunction

pytestmark = pytest.mark.acceptance

SLACK = 1.0 + 1e-9


def holds(lhs, rhs):
    return math.isinf(rhs) or lhs <= rhs * SLACK


def read_csv(text):
    lines = text.splitlines()
    assert lines[0] == SCHEMA
    rows = list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))
    for row in rows:
        for key, value in row.items():
            if key.endswith(("_lhs", "_rhs")) or key in ("H", "W1", "AW1", "AWp", "TV_phi", "ATV_phi"):
                row[key] = float(value)
    return rows


@pytest.fixture(scope="module")
def suite(tmp_path_factory):
    """The 1000-pair suite (T in 1..4, nu << mu), produced by ``verify``."""
    out = tmp_path_factory.mktemp("suite") / "suite.csv"
    start = time.perf_counter()
    code = main(["verify", "--count", "1000", "--T", "1-4", "--seed", "42",
                 "--phi", "const:1.0", "--phi", "rule:1.0,1.0", "--out", str(out)])
    elapsed = time.perf_counter() - start
    return code, read_csv(out.read_text()), elapsed


def violations(rows, name):
    return [r for r in rows if not holds(r[f"{name}_lhs"], r[f"{name}_rhs"])]


def test_criterion_01_classical_oracle(criterion):
    start = time.perf_counter()
    results = [random_transport_comparison(instance_seed(1, k), max_size=5) for k in range(100)]
    elapsed = time.perf_counter() - start
    worst = max(r.gap for r in results)
    ok = worst <= 1e-9 and elapsed < 30
    criterion(1, ok, f"100 transport problems, worst gap {worst:.2e} (tol 1e-9), {elapsed:.1f}s")
    assert ok


def test_criterion_02_adapted_oracle(criterion):
    start = time.perf_counter()
    results = []
    modes = ("independent", "singular", "tilt")
    for k in range(50):
        seed = instance_seed(2, k)
        pair = random_pair(seed, 2, 2, modes[k % 3], denominator=10)
        results.extend(oracle_compare_pair(pair.mu, pair.nu, instance=k, seed=seed))
    elapsed = time.perf_counter() - start
    adapted = [r for r in results if r.quantity != "W1"]
    worst = max(r.gap for r in adapted)
    kinds = sorted({r.quantity for r in adapted})
    ok = worst <= 1e-8 and elapsed < 120 and len(adapted) == 150
    criterion(2, ok, f"50 pairs x {kinds}, worst gap {worst:.2e} (tol 1e-8), {elapsed:.1f}s")
    assert ok


def test_criterion_03_adapted_bolley_villani(suite, criterion):
    code, rows, elapsed = suite
    bad = violations(rows, "adapted_bolley_villani")
    phis = sorted({r["phi"] for r in rows})
    finite = sum(r["H"] < math.inf for r in rows)
    ok = code == 0 and not bad and len(rows) == 2000 and finite == 2000 and elapsed < 120
    criterion(3, ok, f"verify exit {code}, {len(rows)} rows over phi {phis}, "
                     f"{len(bad)} violations, {elapsed:.1f}s")
    assert ok


def test_criterion_04_lemma_bounds(suite, criterion):
    _, rows, _ = suite
    bad_sum = violations(rows, "tv_sum")
    bad_j = violations(rows, "gamma_j")
    bad_psi = violations(rows, "psi_jensen")
    ok = not (bad_sum or bad_j or bad_psi)
    criterion(4, ok, f"tv+sum {len(bad_sum)}, gamma_j {len(bad_j)}, psi Jensen {len(bad_psi)} "
                     f"violations on {len(rows)} rows")
    assert ok


def test_criterion_05_chain_rule(suite, criterion):
    _, rows, _ = suite
    worst = max(r["chain_rule_lhs"] for r in rows if r["H"] < math.inf)
    ok = worst <= 1e-10
    criterion(5, ok, f"max |sum h_j - 2H| = {worst:.2e} (tol 1e-10)")
    assert ok


def test_criterion_06_classical_bolley_villani(suite, criterion):
    _, rows, _ = suite
    bad = violations([r for r in rows if r["H"] < math.inf], "bolley_villani")
    worst = max(r["bolley_villani_lhs"] / r["bolley_villani_rhs"] for r in rows if r["bolley_villani_rhs"] > 0)
    ok = not bad
    criterion(6, ok, f"{len(bad)} violations, max ratio {worst:.4f}")
    assert ok


def test_criterion_07_cross_inequalities(suite, criterion):
    _, rows, _ = suite
    counts = {name: len(violations(rows, name))
              for name in ("w1_le_aw1", "adapted_pinsker", "tv_comparison")}
    ok = not any(counts.values())
    criterion(7, ok, f"violations {counts}")
    assert ok


def test_criterion_08_corollary_general_p(criterion):
    bad = 0
    worst = 0.0
    for k in range(200):
        pair = suite_instance(8, k, T_range=(1, 3))
        metric = PathMetric.for_laws(pair.mu, pair.nu)
        aw2, _ = nested_distance(pair.mu, pair.nu, metric, 2)
        rhs = corollary_rhs_p(pair.mu, pair.nu, 1.0, p=2.0, metric=metric)
        bad += not holds(aw2 ** 2, rhs)
        worst = max(worst, aw2 ** 2 / rhs if rhs > 0 else 0.0)
    ok = bad == 0
    criterion(8, ok, f"200 fixtures p=2 alpha=1, {bad} violations, max ratio {worst:.4f}")
    assert ok


def test_criterion_09_structure(criterion):
    worst_bic = worst_marg = worst_deg = 0.0
    one_step = 0
    for k in range(1000):
        pair = suite_instance(42, k, T_range=(1, 4))
        mu, nu = pair.mu, pair.nu
        metric = PathMetric.for_laws(mu, nu)
        value, pi = nested_distance(mu, nu, metric)
        gamma = build_gamma(mu, nu)
        for c in (pi, gamma):
            worst_marg = max(worst_marg, c.marginal_error(mu, nu))
            worst_bic = max(worst_bic, check_bicausal(c, mu, nu).worst_violation)
        if pair.T == 1:
            one_step += 1
            one = WeightFunction.constant(1.0)
            worst_deg = max(worst_deg, abs(value - wasserstein(mu, nu, metric)),
                            abs(atv_weighted(mu, nu, one) - weighted_tv(mu, nu, one)))
    ok = worst_bic <= 1e-9 and worst_marg <= 1e-10 and worst_deg <= 1e-10 and one_step > 0
    criterion(9, ok, f"1000 suite fixtures: bicausal violation {worst_bic:.1e}, marginal error "
                     f"{worst_marg:.1e}, T=1 gap {worst_deg:.1e} over {one_step} pairs")
    assert ok


def test_criterion_10_determinism(tmp_path, criterion):
    bodies = []
    # separate interpreters with different hash seeds, plus one in-process run
    for jobs, hashseed in (("1", "1"), ("8", "2"), ("8", "3")):
        out = tmp_path / f"jobs{jobs}_{hashseed}.csv"
        env = {**os.environ, "PYTHONHASHSEED": hashseed}
        res = subprocess.run([sys.executable, "-m", "atvkit", "verify", "--seed", "42", "--count", "100",
                              "--jobs", jobs, "--out", str(out)], env=env, capture_output=True)
        assert res.returncode == 0, res.stderr
        bodies.append(out.read_bytes())
    out = tmp_path / "inprocess.csv"
    assert main(["verify", "--seed", "42", "--count", "100", "--jobs", "1", "--out", str(out)]) == 0
    bodies.append(out.read_bytes())
    ok = len(set(bodies)) == 1 and len(bodies[0]) > 0
    criterion(10, ok, f"4 runs (jobs 1/8, three hash seeds), {len(bodies[0])} bytes each, identical={ok}")
    assert ok
