"""Relative entropy, weighted total variation and exponential moments.

Infinite relative entropy is returned as ``math.inf``. Every right-hand side
built from it is ``math.inf`` as well, and callers classify such cases with
:func:`math.isinf` before comparing anything.
"""

from __future__ import annotations

import math
from typing import Mapping

import numpy as np

from .errors import InvalidParameter, SpaceMismatch
from .process_law import PathMeasure, PathMetric, ProcessLaw, WeightFunction, residual_parts


def _check_pair(nu: ProcessLaw, mu: ProcessLaw) -> None:
    if nu.horizon != mu.horizon:
        raise SpaceMismatch(f"horizons differ: {nu.horizon} vs {mu.horizon}")


def _kl(p: Mapping, q: Mapping) -> float:
    """Sum ``p log(p/q)`` with the conventions 0 log 0 = 0, a log(a/0) = inf."""
    terms = []
    for a, pa in p.items():
        if pa <= 0.0:
            continue
        qa = q.get(a, 0.0)
        if qa <= 0.0:
            return math.inf
        terms.append(pa * math.log(pa / qa))
    # clip tiny negative round-off; the exact value is >= 0
    return max(math.fsum(terms), 0.0)


def relative_entropy(nu: ProcessLaw, mu: ProcessLaw) -> float:
    """``H(nu | mu)`` in nats."""
    _check_pair(nu, mu)
    return _kl(nu.path_measure().masses, mu.path_measure().masses)


def entropy_chain_terms(nu: ProcessLaw, mu: ProcessLaw) -> list[float]:
    """Per-step terms ``h_1, ..., h_T`` of the entropy chain rule.

    ``h_1 = 2 H(nu_1 | mu_1)`` and, for ``j >= 2``, ``h_j`` is the
    ``nu_{1:j-1}``-average of ``2 H(nu^{x_{1:j-1}} | mu^{x_{1:j-1}})``. Their sum
    equals ``2 H(nu | mu)``.
    """
    _check_pair(nu, mu)
    terms = []
    for t in range(nu.horizon):
        parts = []
        for prefix in nu.nodes(t):
            weight = nu.prefix_mass(prefix)
            mu_row = mu.kernels.get(prefix)
            if mu_row is None:
                parts = [math.inf]
                break
            h = _kl(nu.kernels[prefix], mu_row)
            if math.isinf(h):
                parts = [math.inf]
                break
            parts.append(weight * 2.0 * h)
        terms.append(math.fsum(parts) if parts != [math.inf] else math.inf)
    return terms


def _weights(phi: WeightFunction, paths) -> np.ndarray:
    w = np.fromiter((phi(x) for x in paths), dtype=float, count=len(paths))
    if np.any(w < 0) or np.any(np.isnan(w)):
        raise InvalidParameter("weight function returned a negative value")
    return w


def weighted_tv(mu: ProcessLaw, nu: ProcessLaw, phi: WeightFunction) -> float:
    """``TV_phi(mu, nu) = sum_x phi(x) |mu - nu|(x)``.

    With ``phi == 1`` this is ``2 sup_A |mu(A) - nu(A)|``.
    """
    _check_pair(nu, mu)
    _, _, absd = residual_parts(mu.path_measure(), nu.path_measure())
    return measure_integral(absd, phi)


def measure_integral(m: PathMeasure, phi: WeightFunction) -> float:
    paths = list(m.masses)
    if not paths:
        return 0.0
    masses = np.fromiter(m.masses.values(), dtype=float, count=len(paths))
    return math.fsum((masses * _weights(phi, paths)).tolist())


def log_exp_moment(mu: ProcessLaw | PathMeasure, phi: WeightFunction) -> float:
    """``log sum_x mu(x) exp(phi(x)^2)``, evaluated with a max shift."""
    m = mu.path_measure() if isinstance(mu, ProcessLaw) else mu
    paths = list(m.masses)
    if not paths:
        raise InvalidParameter("empty measure")
    masses = np.fromiter(m.masses.values(), dtype=float, count=len(paths))
    sq = _weights(phi, paths) ** 2
    top = float(sq.max())
    value = top + math.log(math.fsum(masses * np.exp(sq - top)))
    # phi >= 0 makes the exact value >= 0; remove round-off below zero
    return max(value, 0.0)


def bv_rhs(mu: ProcessLaw, nu: ProcessLaw, phi: WeightFunction) -> float:
    """Right-hand side of the weighted total-variation entropy bound."""
    H = relative_entropy(nu, mu)
    if math.isinf(H):
        return math.inf
    return math.sqrt(1.0 + log_exp_moment(mu, phi)) * math.sqrt(2.0 * H)


def adapted_prefactor(T: int) -> float:
    return 2.0 * math.sqrt(T) + 1.0


def adapted_rhs(mu: ProcessLaw, nu: ProcessLaw, phi: WeightFunction) -> float:
    """``(2 sqrt(T) + 1)`` times :func:`bv_rhs`."""
    rhs = bv_rhs(mu, nu, phi)
    return math.inf if math.isinf(rhs) else adapted_prefactor(mu.horizon) * rhs


def corollary_rhs_p(
    mu: ProcessLaw,
    nu: ProcessLaw,
    alpha: float,
    x0=None,
    p: float = 1.0,
    metric: PathMetric | None = None,
) -> float:
    """Entropy bound on ``AW_p(mu, nu) ** p``.

    ``2**(p-1) (2 sqrt(T) + 1) / sqrt(alpha)`` times
    ``(1 + log E_mu exp(alpha d(x, x0)**(2p)))**0.5 * sqrt(2 H(nu|mu))``.
    For ``p = 1`` this is the adapted T1 bound for ``AW_1``.
    """
    if not alpha > 0:
        raise InvalidParameter(f"alpha must be > 0, got {alpha}")
    if not p >= 1:
        raise InvalidParameter(f"p must be >= 1, got {p}")
    _check_pair(nu, mu)
    H = relative_entropy(nu, mu)
    if math.isinf(H):
        return math.inf
    if metric is None:
        metric = PathMetric.for_laws(mu, nu)
    phi = WeightFunction.rule(alpha, p, metric, x0)
    factor = 2.0 ** (p - 1.0) * adapted_prefactor(mu.horizon) / math.sqrt(alpha)
    return factor * math.sqrt(1.0 + log_exp_moment(mu, phi)) * math.sqrt(2.0 * H)
