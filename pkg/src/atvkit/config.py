"""Centralised tolerance policy.

Every numerical threshold used by the solvers, the verification harness and
the CLI lives here. ``ATVKIT_TOL_OVERRIDE`` (``name=value,name=value``) may
replace individual entries for experiments; it is never set by default.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace


@dataclass(frozen=True)
class Tolerances:
    # kernel rows stored in a ProcessLaw
    law_sum: float = 1e-12
    # rows read from a law document
    parse_sum: float = 1e-9
    # float-vs-float identities (chain rule, coupling evaluation, marginals)
    equality: float = 1e-10
    # float solver vs exact oracle
    oracle: float = 1e-8
    # relative slack for every inequality: lhs <= rhs * (1 + slack)
    inequality_slack: float = 1e-9
    # absolute floor applied to the inequality test so that rhs == 0 cases
    # are not flagged on round-off
    inequality_floor: float = 1e-12
    # absolute discrepancy allowed between conditional tables
    bicausal: float = 1e-9


def _from_env() -> Tolerances:
    raw = os.environ.get("ATVKIT_TOL_OVERRIDE", "").strip()
    tol = Tolerances()
    if not raw:
        return tol
    known = {f.name for f in fields(Tolerances)}
    updates = {}
    for item in raw.split(","):
        name, _, value = item.partition("=")
        name = name.strip()
        if name not in known:
            raise ValueError(f"ATVKIT_TOL_OVERRIDE: unknown tolerance {name!r}")
        updates[name] = float(value)
    return replace(tol, **updates)


TOL = _from_env()


def inequality_status(lhs: float, rhs: float, tol: Tolerances = TOL) -> str:
    """Classify ``lhs <= rhs`` under the slack policy.

    Returns one of ``holds``, ``holds-trivially-infinite-rhs``, ``VIOLATED``.
    """
    if rhs == float("inf"):
        return "holds-trivially-infinite-rhs"
    if lhs > rhs * (1.0 + tol.inequality_slack) + tol.inequality_floor:
        return "VIOLATED"
    return "holds"
