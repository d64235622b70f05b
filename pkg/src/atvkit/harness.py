"""Evaluation of every inequality on a pair of laws, and CSV emission.

One :class:`VerificationRecord` is produced per ``(pair, weight function)``.
Each named check stores ``lhs``, ``rhs``, ``ratio`` and a status from
:func:`atvkit.config.inequality_status`. Besides the inequalities, a few
structural identities (chain rule, coupling marginals, bicausality) are
recorded as checks of the form ``gap <= tolerance``.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .adapted import (
    adapted_transport,
    build_gamma,
    check_bicausal,
    gamma_j,
    psi_jensen_bound,
)
from .config import TOL, inequality_status
from .divergences import (
    adapted_prefactor,
    corollary_rhs_p,
    entropy_chain_terms,
    log_exp_moment,
    measure_integral,
    relative_entropy,
    weighted_tv,
)
from .errors import InvalidParameter
from .generate import FixturePair, suite_instance
from .ot_core import wasserstein
from .process_law import PathMetric, ProcessLaw, WeightFunction

SCHEMA = "# atvkit-verify-csv v1"

CHECKS = (
    "bolley_villani",
    "adapted_bolley_villani",
    "tv_sum",
    "gamma_j",
    "psi_jensen",
    "adapted_pinsker",
    "tv_comparison",
    "w1_le_aw1",
    "corollary_p1",
    "corollary_p",
    "chain_rule",
    "gamma_coupling",
    "nested_coupling",
)

META_COLUMNS = ("instance", "seed", "T", "branching", "mode", "metric", "phi", "p", "alpha")
VALUE_COLUMNS = ("H", "W1", "AW1", "AWp", "TV_phi", "ATV_phi", "log_exp_moment")


def parse_phi(spec: str, metric: PathMetric) -> WeightFunction:
    """``const:C`` or ``rule:alpha,p`` (base point at the origin)."""
    kind, _, arg = spec.partition(":")
    try:
        if kind == "const":
            return WeightFunction.constant(float(arg))
        if kind == "rule":
            alpha, p = (float(v) for v in arg.split(","))
            return WeightFunction.rule(alpha, p, metric)
    except ValueError as exc:
        raise InvalidParameter(f"bad weight spec {spec!r}: {exc}") from None
    raise InvalidParameter(f"bad weight spec {spec!r}; expected const:C or rule:alpha,p")


@dataclass
class Check:
    lhs: float
    rhs: float

    @property
    def status(self) -> str:
        return inequality_status(self.lhs, self.rhs)

    @property
    def ratio(self) -> float:
        if math.isinf(self.rhs):
            return 0.0
        if self.rhs == 0.0:
            return 0.0 if self.lhs <= TOL.inequality_floor else math.inf
        return self.lhs / self.rhs


@dataclass
class VerificationRecord:
    instance: int
    seed: int
    T: int
    branching: int
    mode: str
    metric: str
    phi: str
    p: float
    alpha: float
    values: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)

    @property
    def violated(self) -> list[str]:
        return [name for name, c in self.checks.items() if c.status == "VIOLATED"]

    def row(self) -> list[str]:
        out = [_fmt(getattr(self, k)) for k in META_COLUMNS]
        out += [_fmt(self.values[k]) for k in VALUE_COLUMNS]
        for name in CHECKS:
            c = self.checks[name]
            out += [_fmt(c.lhs), _fmt(c.rhs), _fmt(c.ratio), c.status]
        return out


def _fmt(x) -> str:
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(float(x))
    return str(x)


def csv_header() -> list[str]:
    cols = list(META_COLUMNS) + list(VALUE_COLUMNS)
    for name in CHECKS:
        cols += [f"{name}_lhs", f"{name}_rhs", f"{name}_ratio", f"{name}_status"]
    return cols


def _coupling_check(pi, mu, nu, value=None, cost=None) -> Check:
    """Worst of marginal error, bicausality violation and cost gap, each
    scaled by its own tolerance so the threshold is 1."""
    report = check_bicausal(pi, mu, nu)
    worst = max(pi.marginal_error(mu, nu) / TOL.equality, report.worst_violation / TOL.bicausal)
    if value is not None:
        worst = max(worst, abs(pi.integrate(cost) - value) / TOL.inequality_slack)
    return Check(worst, 1.0)


def evaluate_pair(mu: ProcessLaw, nu: ProcessLaw, phis: list[str], *, combine: str = "l1",
                  p: float = 2.0, alpha: float = 1.0, instance: int = 0, seed: int = 0,
                  branching: int = 0, mode: str = "file") -> list[VerificationRecord]:
    """Compute every quantity and check for one pair, one record per weight."""
    T = mu.horizon
    metric = PathMetric.for_laws(mu, nu, combine=combine)
    H = relative_entropy(nu, mu)
    h = entropy_chain_terms(nu, mu)
    sqrt2H = math.inf if math.isinf(H) else math.sqrt(2.0 * H)

    if math.isinf(H):
        chain_gap = 0.0 if any(math.isinf(x) for x in h) else math.inf
    else:
        chain_gap = abs(math.fsum(h) - 2.0 * H)

    W1 = wasserstein(mu, nu, metric, 1.0)
    dist = lambda x, y: metric(x, y)
    res1 = adapted_transport(mu, nu, lambda xs, ys: metric.pairwise(xs, ys))
    AW1 = max(res1.value, 0.0)
    resp = adapted_transport(mu, nu, lambda xs, ys: metric.pairwise(xs, ys) ** p)
    AWp_pow = max(resp.value, 0.0)
    gamma = build_gamma(mu, nu)
    gammas = [gamma_j(mu, nu, j) for j in range(1, T + 1)]

    tv1 = weighted_tv(mu, nu, WeightFunction.constant(1.0))
    atv1 = 2.0 * gamma.off_diagonal_mass()
    rhs_p1 = corollary_rhs_p(mu, nu, alpha, None, 1.0, metric)
    rhs_p = corollary_rhs_p(mu, nu, alpha, None, p, metric)

    shared = {
        "adapted_pinsker": Check(atv1, math.sqrt(T) * sqrt2H),
        "tv_comparison": Check(atv1, (2 * T - 1) * tv1),
        "w1_le_aw1": Check(W1, AW1),
        "corollary_p1": Check(AW1, rhs_p1),
        "corollary_p": Check(AWp_pow, rhs_p),
        "chain_rule": Check(chain_gap, TOL.equality),
        "gamma_coupling": _coupling_check(gamma, mu, nu),
        "nested_coupling": max(
            _coupling_check(res1.coupling, mu, nu, res1.value, dist),
            _coupling_check(resp.coupling, mu, nu, resp.value, lambda x, y: dist(x, y) ** p),
            key=lambda c: c.lhs,
        ),
    }

    records = []
    for spec in phis:
        phi = parse_phi(spec, metric)
        L = log_exp_moment(mu, phi)
        tv = weighted_tv(mu, nu, phi)
        atv = math.fsum(m * (phi(x) + phi(y)) for (x, y), m in gamma.masses.items() if x != y)
        integrals = [measure_integral(g, phi) for g in gammas]
        bv = math.inf if math.isinf(H) else math.sqrt(1.0 + L) * sqrt2H

        per_j = [
            Check(integrals[j], math.inf if math.isinf(h[j]) else math.sqrt(1.0 + L) * math.sqrt(h[j]))
            for j in range(T)
        ]
        finite = [c for c in per_j if not math.isinf(c.rhs)]
        gj = max(finite, key=lambda c: c.ratio) if finite else per_j[0]

        # compared on the log scale: lhs = exp(log lhs - log rhs), rhs = 1
        gaps = [
            lhs - rhs
            for j in range(1, T + 1)
            for lhs, rhs in (psi_jensen_bound(mu, phi, j, q) for q in mu.nodes(j - 1))
        ]
        jensen = Check(math.exp(min(max(gaps), 700.0)), 1.0)

        checks = {
            "bolley_villani": Check(tv, bv),
            "adapted_bolley_villani": Check(atv, math.inf if math.isinf(bv) else adapted_prefactor(T) * bv),
            "tv_sum": Check(atv, tv + 2.0 * math.fsum(integrals)),
            "gamma_j": gj,
            "psi_jensen": jensen,
        }
        checks.update(shared)
        records.append(VerificationRecord(
            instance=instance, seed=seed, T=T, branching=branching, mode=mode,
            metric=combine, phi=spec, p=p, alpha=alpha,
            values={"H": H, "W1": W1, "AW1": AW1, "AWp": AWp_pow ** (1.0 / p),
                    "TV_phi": tv, "ATV_phi": atv, "log_exp_moment": L},
            checks={name: checks[name] for name in CHECKS},
        ))
    return records


@dataclass(frozen=True)
class SuiteSpec:
    count: int
    seed: int = 0
    T_range: tuple = (1, 4)
    branchings: tuple = (2, 3)
    modes: tuple = ("tilt", "independent")
    phis: tuple = ("const:1.0", "rule:1.0,1.0")
    combine: str = "l1"
    p: float = 2.0
    alpha: float = 1.0


def evaluate_instance(spec: SuiteSpec, index: int) -> list[VerificationRecord]:
    pair: FixturePair = suite_instance(spec.seed, index, spec.T_range, spec.branchings, spec.modes)
    return evaluate_pair(pair.mu, pair.nu, list(spec.phis), combine=spec.combine, p=spec.p,
                         alpha=spec.alpha, instance=index, seed=pair.seed,
                         branching=pair.branching, mode=pair.mode)


def _evaluate_star(args):
    return evaluate_instance(*args)


def run_suite(spec: SuiteSpec, jobs: int = 1) -> list[VerificationRecord]:
    """Evaluate ``spec.count`` instances; output order is the instance order."""
    tasks = [(spec, i) for i in range(spec.count)]
    if jobs <= 1 or spec.count <= 1:
        batches = map(_evaluate_star, tasks)
        return [r for batch in batches for r in batch]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        batches = pool.map(_evaluate_star, tasks, chunksize=max(1, spec.count // (4 * jobs)))
        return [r for batch in batches for r in batch]


def records_to_csv(records: list[VerificationRecord]) -> str:
    buf = io.StringIO()
    buf.write(SCHEMA + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(csv_header())
    for r in records:
        writer.writerow(r.row())
    return buf.getvalue()


# ---------------------------------------------------------------------------
# oracle agreement
# ---------------------------------------------------------------------------


@dataclass
class OracleComparison:
    instance: int
    seed: int
    quantity: str
    computed: float
    exact: object
    detail: dict = field(default_factory=dict)

    @property
    def gap(self) -> float:
        return abs(self.computed - float(self.exact))

    @property
    def ok(self) -> bool:
        return self.gap <= TOL.oracle


def oracle_compare_pair(mu: ProcessLaw, nu: ProcessLaw, *, instance: int = 0, seed: int = 0,
                        table_seed: int | None = None) -> list[OracleComparison]:
    """Nested distance, adapted weighted TV (rule and table weights) and W1
    against the exact rational programs."""
    import numpy as np

    from .adapted import atv_weighted, nested_distance
    from .generate import random_table_phi
    from .oracle import bicausal_lp, classical_ot_lp
    from .process_law import save_law

    metric = PathMetric.for_laws(mu, nu)
    dist = lambda x, y: metric(x, y)
    detail = {"mu": save_law(mu), "nu": save_law(nu)}
    out = []
    aw, _ = nested_distance(mu, nu, metric, 1.0)
    out.append(OracleComparison(instance, seed, "AW1", aw, bicausal_lp(mu, nu, dist), detail))
    paths = set(mu.support()) | set(nu.support())
    rng = np.random.default_rng(seed if table_seed is None else table_seed)
    for name, phi in (("ATV_rule", WeightFunction.rule(1.0, 1.0, metric)),
                      ("ATV_table", random_table_phi(rng, paths))):
        exact = bicausal_lp(mu, nu, lambda x, y, phi=phi: (phi(x) + phi(y)) * (x != y))
        out.append(OracleComparison(instance, seed, name, atv_weighted(mu, nu, phi), exact, detail))
    out.append(OracleComparison(instance, seed, "W1", wasserstein(mu, nu, metric),
                                classical_ot_lp(mu, nu, dist), detail))
    return out


def random_transport_comparison(seed: int, max_size: int = 5, denominator: int = 12) -> OracleComparison:
    """Random rational transport problem of size at most ``max_size`` squared."""
    import numpy as np

    from .oracle import classical_ot_lp
    from .ot_core import TransportProblem, solve_transport

    rng = np.random.default_rng(seed)
    m, n = (int(v) for v in rng.integers(1, max_size + 1, size=2))

    def marginal(k):
        counts = rng.multinomial(denominator - k, np.ones(k) / k) + 1 if denominator >= k else np.ones(k)
        return [int(c) for c in counts]

    a, b = marginal(m), marginal(n)
    cost = rng.integers(0, 10, size=(m, n))
    from fractions import Fraction

    exact = classical_ot_lp([Fraction(c, sum(a)) for c in a], [Fraction(c, sum(b)) for c in b],
                            cost.tolist())
    plan = solve_transport(TransportProblem(cost, np.array(a) / sum(a), np.array(b) / sum(b)))
    return OracleComparison(0, seed, "OT", plan.value, exact,
                            {"cost": cost.tolist(), "source": a, "target": b})


# ---------------------------------------------------------------------------
# ratio scan
# ---------------------------------------------------------------------------

SCAN_ALPHAS = (1.0, 1e2, 1e4)
SCAN_COLUMNS = (
    "T", "instances", "sqrt_T", "two_sqrt_T_plus_1",
    "max_atv_over_sqrt2H", "max_tv_over_sqrt2H", "max_pinsker_ratio",
    "max_adapted_bv_ratio_const", "max_adapted_bv_ratio_rule",
) + tuple(f"max_atv_sqrt_alpha_over_sqrt_alpha_sqrt2H_a{a:g}" for a in SCAN_ALPHAS) + tuple(
    f"bound_a{a:g}" for a in SCAN_ALPHAS
)


def ratio_scan(T_values, seeds_per_T: int, master: int = 0, branchings=(2, 3)) -> list[dict]:
    """Largest observed ratio of each adapted bound, per horizon.

    Instances with ``H = 0`` or ``H = inf`` are skipped (ratios undefined).
    """
    from .adapted import atv_weighted
    from .divergences import adapted_rhs
    from .generate import instance_seed, random_pair

    rows = []
    for T in T_values:
        best = {k: 0.0 for k in SCAN_COLUMNS[4:]}
        used = 0
        for k in range(seeds_per_T):
            seed = instance_seed(master, T * 1_000_003 + k)
            b = branchings[seed % len(branchings)]
            mode = ("tilt", "independent")[(seed >> 8) % 2]
            pair = random_pair(seed, T, b, mode)
            mu, nu = pair.mu, pair.nu
            H = relative_entropy(nu, mu)
            if H == 0.0 or math.isinf(H):
                continue
            used += 1
            s = math.sqrt(2.0 * H)
            metric = PathMetric.for_laws(mu, nu)
            one = WeightFunction.constant(1.0)
            rule = WeightFunction.rule(1.0, 1.0, metric)
            atv1 = atv_weighted(mu, nu, one)
            vals = {
                "max_atv_over_sqrt2H": atv1 / s,
                "max_tv_over_sqrt2H": weighted_tv(mu, nu, one) / s,
                "max_pinsker_ratio": atv1 / (math.sqrt(T) * s),
                "max_adapted_bv_ratio_const": atv1 / adapted_rhs(mu, nu, one),
                "max_adapted_bv_ratio_rule": atv_weighted(mu, nu, rule) / adapted_rhs(mu, nu, rule),
            }
            for a in SCAN_ALPHAS:
                c = WeightFunction.constant(math.sqrt(a))
                vals[f"max_atv_sqrt_alpha_over_sqrt_alpha_sqrt2H_a{a:g}"] = (
                    atv_weighted(mu, nu, c) / math.sqrt(a) / s
                )
            for key, v in vals.items():
                best[key] = max(best[key], v)
        row = {"T": T, "instances": used, "sqrt_T": math.sqrt(T),
               "two_sqrt_T_plus_1": adapted_prefactor(T)}
        row.update(best)
        for a in SCAN_ALPHAS:
            row[f"bound_a{a:g}"] = adapted_prefactor(T) * math.sqrt(1.0 / a + 1.0)
        rows.append(row)
    return rows


def scan_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    buf.write("# atvkit-ratio-scan-csv v1\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SCAN_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in SCAN_COLUMNS])
    return buf.getvalue()
