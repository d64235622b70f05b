"""Command-line harness.

    atvkit compute --mu a.json --nu b.json
    atvkit compute --seed 7 --T 3
    atvkit verify --count 1000 --T 1-4 --seed 42 --out suite.csv
    atvkit oracle-check --count 50 --seed 0
    atvkit ratio-scan --T 1,2,3,4 --seeds 200

Exit codes: 0 success, 1 a check was violated (or the oracle disagreed),
2 invalid arguments or input documents, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

from . import __version__
from .config import TOL
from .errors import AtvkitError
from .generate import random_pair
from .harness import (
    CHECKS,
    SuiteSpec,
    evaluate_pair,
    oracle_compare_pair,
    random_transport_comparison,
    ratio_scan,
    records_to_csv,
    scan_to_csv,
)
from .process_law import load_law

EXIT_OK, EXIT_VIOLATION, EXIT_INPUT, EXIT_IO = 0, 1, 2, 3
DEFAULT_PHIS = ("const:1.0", "rule:1.0,1.0")


class IOFailure(Exception):
    pass


def _range(text: str) -> tuple[int, int]:
    lo, sep, hi = text.partition("-")
    lo = int(lo)
    return (lo, int(hi)) if sep else (lo, lo)


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise IOFailure(f"cannot read {path}: {exc.strerror}") from None


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise IOFailure(f"cannot write {out}: {exc.strerror}") from None


def _jsonable(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def cmd_compute(args) -> int:
    from .divergences import entropy_chain_terms, log_exp_moment
    from .harness import parse_phi
    from .process_law import PathMetric

    if args.mu or args.nu:
        if not (args.mu and args.nu):
            raise AtvkitError("--mu and --nu must be given together")
        mu, nu = load_law(_read(args.mu)), load_law(_read(args.nu))
        meta = {"source": [args.mu, args.nu]}
        extra = {}
    else:
        T = _range(args.T or "2")[0]
        pair = random_pair(args.seed or 0, T, args.branching, args.mode)
        mu, nu = pair.mu, pair.nu
        meta = {"seed": pair.seed, "T": T, "branching": pair.branching, "mode": pair.mode}
        extra = {"branching": pair.branching, "mode": pair.mode, "seed": pair.seed}
    phis = args.phi or list(DEFAULT_PHIS)
    records = evaluate_pair(mu, nu, phis, combine=args.metric, p=args.p, alpha=args.alpha, **extra)
    metric = PathMetric.for_laws(mu, nu, combine=args.metric)
    report = {
        "instance": meta,
        "horizon": mu.horizon,
        "metric": args.metric,
        "p": args.p,
        "alpha": args.alpha,
        "H": records[0].values["H"],
        "chain_terms": entropy_chain_terms(nu, mu),
        "W1": records[0].values["W1"],
        "AW1": records[0].values["AW1"],
        "AWp": records[0].values["AWp"],
        "weights": [],
    }
    violated = False
    for spec, rec in zip(phis, records):
        entry = {
            "phi": spec,
            "TV_phi": rec.values["TV_phi"],
            "ATV_phi": rec.values["ATV_phi"],
            "log_exp_moment": log_exp_moment(mu, parse_phi(spec, metric)),
            "checks": {
                name: {"lhs": c.lhs, "rhs": c.rhs, "ratio": c.ratio, "status": c.status}
                for name, c in rec.checks.items()
            },
        }
        violated |= bool(rec.violated)
        report["weights"].append(entry)
    _emit(json.dumps(_jsonable(report), indent=2) + "\n", args.out)
    return EXIT_VIOLATION if violated else EXIT_OK


def _suite_spec(args) -> SuiteSpec:
    modes = {
        "abs-cont": ("tilt", "independent"),
        "tilt": ("tilt",),
        "independent": ("independent",),
        "singular": ("singular",),
    }[args.mode]
    return SuiteSpec(
        count=args.count,
        seed=args.seed,
        T_range=_range(args.T),
        branchings=tuple(_int_list(args.branching)),
        modes=modes,
        phis=tuple(args.phi or DEFAULT_PHIS),
        combine=args.metric,
        p=args.p,
        alpha=args.alpha,
    )


def cmd_verify(args) -> int:
    from .harness import run_suite

    spec = _suite_spec(args)
    lo, hi = spec.T_range
    if not 1 <= lo <= hi <= 5:
        raise AtvkitError("--T must lie within 1..5")
    records = run_suite(spec, jobs=args.jobs)
    _emit(records_to_csv(records), args.out)
    bad = [(r.instance, r.phi, name) for r in records for name in r.violated]
    for inst, phi, name in bad[:20]:
        print(f"VIOLATED instance={inst} phi={phi} check={name}", file=sys.stderr)
    print(f"verify: {len(records)} rows, {len(bad)} violations", file=sys.stderr)
    return EXIT_VIOLATION if bad else EXIT_OK


def cmd_oracle_check(args) -> int:
    from .generate import instance_seed

    T = _range(args.T)[1]
    if T > 3:
        raise AtvkitError("oracle-check supports T <= 3")
    results = []
    for k in range(args.transport_count):
        results.append(random_transport_comparison(instance_seed(args.seed, 10_000 + k),
                                                   max_size=args.max_size))
    modes = ("independent", "singular", "equal")
    for k in range(args.count):
        seed = instance_seed(args.seed, k)
        pair = random_pair(seed, T, args.branching, modes[k % len(modes)], denominator=args.denominator)
        results.extend(oracle_compare_pair(pair.mu, pair.nu, instance=k, seed=seed))
    failures = [r for r in results if not r.ok]
    lines = []
    for r in results:
        lines.append(json.dumps({
            "instance": r.instance, "seed": r.seed, "quantity": r.quantity,
            "computed": r.computed, "exact": str(r.exact), "gap": r.gap, "ok": r.ok,
            **({"detail": r.detail} if not r.ok else {}),
        }))
    _emit("\n".join(lines) + "\n", args.out)
    worst = max((r.gap for r in results), default=0.0)
    print(f"oracle-check: {len(results)} comparisons, {len(failures)} disagreements, "
          f"worst gap {worst:.3e} (tolerance {TOL.oracle:g})", file=sys.stderr)
    return EXIT_VIOLATION if failures else EXIT_OK


def cmd_ratio_scan(args) -> int:
    rows = ratio_scan(_int_list(args.T), args.seeds, args.seed, tuple(_int_list(args.branching)))
    _emit(scan_to_csv(rows), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="atvkit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"atvkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, T_default):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--T", default=T_default, help="horizon N or range LO-HI")
        p.add_argument("--out", default=None, help="write output to FILE instead of stdout")

    def weights(p):
        p.add_argument("--phi", action="append",
                       help="weight function const:C or rule:alpha,p (repeatable)")
        p.add_argument("--metric", choices=("l1", "max"), default="l1")
        p.add_argument("--p", type=float, default=2.0, help="exponent of the general-p bound")
        p.add_argument("--alpha", type=float, default=1.0)

    p = sub.add_parser("compute", help="all quantities for one pair")
    common(p, None)
    weights(p)
    p.add_argument("--mu")
    p.add_argument("--nu")
    p.add_argument("--branching", type=int, default=2)
    p.add_argument("--mode", choices=("tilt", "independent", "singular", "equal"), default="tilt")
    p.set_defaults(func=cmd_compute)

    p = sub.add_parser("verify", help="check every inequality on a seeded suite")
    common(p, "1-4")
    weights(p)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--branching", default="2,3")
    p.add_argument("--mode", choices=("abs-cont", "tilt", "independent", "singular"),
                   default="abs-cont")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("oracle-check", help="compare solvers with exact rational programs")
    common(p, "2")
    p.add_argument("--count", type=int, default=50)
    p.add_argument("--transport-count", type=int, default=100)
    p.add_argument("--max-size", type=int, default=5)
    p.add_argument("--branching", type=int, default=2)
    p.add_argument("--denominator", type=int, default=10)
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("ratio-scan", help="largest observed bound ratios per horizon")
    common(p, "1,2,3,4")
    p.add_argument("--seeds", type=int, default=100, help="instances per horizon")
    p.add_argument("--branching", default="2,3")
    p.set_defaults(func=cmd_ratio_scan)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except IOFailure as exc:
        print(f"atvkit: {exc}", file=sys.stderr)
        return EXIT_IO
    except (AtvkitError, ValueError) as exc:
        print(f"atvkit: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
