"""Adapted transport on probability trees.

* :func:`adapted_transport` is the backward dynamic program over pairs of tree
  nodes. Because a node is its whole history, the recursion is exact for any
  cost on full paths, separable or not.
* :func:`build_gamma` is the explicit bicausal coupling that keeps as much
  mass on the diagonal as each pair of kernels allows, couples the residuals
  by a normalised product, and continues independently once paths split.
* :func:`gamma_j`, :func:`psi_j` and the bound helpers expose the per-step
  quantities used by the inequality harness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from types import MappingProxyType
from typing import Callable, Mapping

import numpy as np

from .config import TOL
from .divergences import entropy_chain_terms, log_exp_moment, measure_integral, weighted_tv
from .errors import InvalidIndex, NotACoupling, PrefixNotSupported, SpaceMismatch, TooLarge
from .ot_core import TransportProblem, solve_transport
from .process_law import (
    PathMeasure,
    PathMetric,
    ProcessLaw,
    WeightFunction,
    as_path,
    meet,
    projection,
    tail_law,
)

PairCost = Callable[[list, list], np.ndarray]


@dataclass(frozen=True)
class Coupling:
    """Finite joint law on pairs ``(x, y)`` of full paths."""

    masses: Mapping[tuple, float]
    horizon: int

    def __post_init__(self):
        clean = {(tuple(x), tuple(y)): float(m) for (x, y), m in self.masses.items() if m > 0}
        object.__setattr__(self, "masses", MappingProxyType(clean))

    def marginal_x(self) -> PathMeasure:
        out: dict = {}
        for (x, _), m in self.masses.items():
            out[x] = out.get(x, 0.0) + m
        return PathMeasure(out, self.horizon)

    def marginal_y(self) -> PathMeasure:
        out: dict = {}
        for (_, y), m in self.masses.items():
            out[y] = out.get(y, 0.0) + m
        return PathMeasure(out, self.horizon)

    def integrate(self, cost: Callable[[tuple, tuple], float]) -> float:
        return math.fsum(m * cost(x, y) for (x, y), m in self.masses.items())

    def off_diagonal_mass(self) -> float:
        return math.fsum(m for (x, y), m in self.masses.items() if x != y)

    def marginal_error(self, mu: ProcessLaw, nu: ProcessLaw) -> float:
        err = 0.0
        for got, want in ((self.marginal_x(), mu.path_measure()), (self.marginal_y(), nu.path_measure())):
            for k in dict.fromkeys([*got.masses, *want.masses]):
                err = max(err, abs(got[k] - want[k]))
        return err


@dataclass(frozen=True)
class BicausalityReport:
    ok: bool
    worst_violation: float
    witness: dict | None = None


def _check_pair(mu: ProcessLaw, nu: ProcessLaw) -> None:
    if mu.horizon != nu.horizon:
        raise SpaceMismatch(f"horizons differ: {mu.horizon} vs {nu.horizon}")


# ---------------------------------------------------------------------------
# bicausality
# ---------------------------------------------------------------------------


def check_bicausal(pi: Coupling, mu: ProcessLaw, nu: ProcessLaw, tol: float = TOL.bicausal) -> BicausalityReport:
    """Test both conditional-independence conditions of a bicausal coupling.

    For every ``t < T`` and every prefix pair charged by ``pi``, the
    conditional law of ``X_{t+1:T}`` given ``(X_{1:t}, Y_{1:t})`` must equal the
    tail law of ``mu`` given ``X_{1:t}``, and symmetrically for ``Y``.
    """
    _check_pair(mu, nu)
    err = pi.marginal_error(mu, nu)
    if err > TOL.equality:
        raise NotACoupling(f"marginals deviate by {err:.3e}")
    T = mu.horizon
    worst = 0.0
    witness = None
    mu_pm, nu_pm = mu.path_measure(), nu.path_measure()
    for t in range(1, T):
        block: dict = {}
        cond_x: dict = {}
        cond_y: dict = {}
        for (x, y), m in pi.masses.items():
            key = (x[:t], y[:t])
            block[key] = block.get(key, 0.0) + m
            cx = cond_x.setdefault(key, {})
            cx[x[t:]] = cx.get(x[t:], 0.0) + m
            cy = cond_y.setdefault(key, {})
            cy[y[t:]] = cy.get(y[t:], 0.0) + m
        for key, total in block.items():
            for side, cond, law, pm in (("x", cond_x, mu, mu_pm), ("y", cond_y, nu, nu_pm)):
                prefix = key[0] if side == "x" else key[1]
                base = law.prefix_mass(prefix)
                got = {s: v / total for s, v in cond[key].items()}
                ref = {s: pm[prefix + s] / base for s in _suffixes(law, prefix)}
                gap = max(abs(got.get(s, 0.0) - ref.get(s, 0.0)) for s in dict.fromkeys([*got, *ref]))
                if gap > worst:
                    worst = gap
                    witness = {"t": t, "side": side, "prefix_pair": key,
                               "conditional": got, "reference": ref}
    return BicausalityReport(ok=worst <= tol, worst_violation=worst, witness=witness)


def _suffixes(law: ProcessLaw, prefix: tuple):
    return [x[len(prefix):] for x in law.support() if x[: len(prefix)] == prefix]


# ---------------------------------------------------------------------------
# dynamic program
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AdaptedResult:
    value: float
    coupling: Coupling


def adapted_transport(mu: ProcessLaw, nu: ProcessLaw, pair_cost: PairCost,
                      *, max_node_pairs: int = 2_000_000) -> AdaptedResult:
    """Minimise ``E_pi[c(X, Y)]`` over bicausal couplings by backward induction.

    Args:
        pair_cost: maps lists of full paths ``xs``, ``ys`` to the cost matrix
            ``c(xs[i], ys[j])``.
        max_node_pairs: cap on the number of node pairs visited.
    """
    _check_pair(mu, nu)
    T = mu.horizon
    nodes_x = [mu.nodes(t) for t in range(T + 1)]
    nodes_y = [nu.nodes(t) for t in range(T + 1)]
    pairs = sum(len(a) * len(b) for a, b in zip(nodes_x, nodes_y))
    if pairs > max_node_pairs:
        raise TooLarge(f"{pairs} node pairs exceed the cap of {max_node_pairs}")

    index_x = [{p: i for i, p in enumerate(level)} for level in nodes_x]
    index_y = [{p: i for i, p in enumerate(level)} for level in nodes_y]
    value = np.asarray(pair_cost(nodes_x[T], nodes_y[T]), dtype=float)
    plans: dict = {}
    for t in range(T - 1, -1, -1):
        child_x = [[index_x[t + 1][p + (a,)] for a in mu.kernels[p]] for p in nodes_x[t]]
        child_y = [[index_y[t + 1][q + (b,)] for b in nu.kernels[q]] for q in nodes_y[t]]
        prob_x = [np.fromiter(mu.kernels[p].values(), float) for p in nodes_x[t]]
        prob_y = [np.fromiter(nu.kernels[q].values(), float) for q in nodes_y[t]]
        current = np.empty((len(nodes_x[t]), len(nodes_y[t])))
        for i, p in enumerate(nodes_x[t]):
            for j, q in enumerate(nodes_y[t]):
                cost = value[np.ix_(child_x[i], child_y[j])]
                sol = solve_transport(TransportProblem(cost, prob_x[i], prob_y[j]))
                current[i, j] = sol.value
                plans[(p, q)] = sol.plan
        value = current

    masses: dict = {}
    frontier = {((), ()): 1.0}
    for t in range(T):
        nxt: dict = {}
        for (p, q), m in frontier.items():
            plan = plans[(p, q)]
            ax = list(mu.kernels[p])
            by = list(nu.kernels[q])
            for i, j in zip(*np.nonzero(plan)):
                nxt[(p + (ax[i],), q + (by[j],))] = m * plan[i, j]
        frontier = nxt
    masses = frontier
    return AdaptedResult(value=float(value[0, 0]), coupling=Coupling(masses, T))


def nested_distance(mu: ProcessLaw, nu: ProcessLaw, metric: PathMetric | None = None,
                    p: float = 1.0, **kwargs) -> tuple[float, Coupling]:
    """``AW_p(mu, nu)`` and an optimal bicausal coupling."""
    _check_pair(mu, nu)
    if metric is None:
        metric = PathMetric.for_laws(mu, nu)
    res = adapted_transport(mu, nu, lambda xs, ys: metric.pairwise(xs, ys) ** p, **kwargs)
    return max(res.value, 0.0) ** (1.0 / p), res.coupling


def atv_pair_cost(phi: WeightFunction) -> PairCost:
    """Cost matrix of ``(phi(x) + phi(y)) 1{x != y}``."""

    def cost(xs, ys):
        fx = np.array([phi(x) for x in xs], dtype=float)
        fy = np.array([phi(y) for y in ys], dtype=float)
        out = fx[:, None] + fy[None, :]
        iy = {y: j for j, y in enumerate(ys)}
        for i, x in enumerate(xs):
            j = iy.get(x)
            if j is not None:
                out[i, j] = 0.0
        return out

    return cost


# ---------------------------------------------------------------------------
# the explicit coupling
# ---------------------------------------------------------------------------


def _diagonal_kernel_coupling(kx: Mapping[str, float], ky: Mapping[str, float]):
    """Diagonal ``kx ^ ky`` plus the normalised product of the residuals."""
    out = {}
    pos, neg = {}, {}
    for a in dict.fromkeys([*kx, *ky]):
        pa, qa = kx.get(a, 0.0), ky.get(a, 0.0)
        common = min(pa, qa)
        if common > 0.0:
            out[(a, a)] = common
        if pa > qa:
            pos[a] = pa - qa
        elif qa > pa:
            neg[a] = qa - pa
    excess = math.fsum(pos.values())
    # equal kernels: no residual term
    if excess > 0.0 and neg:
        for a, pa in pos.items():
            for b, qb in neg.items():
                out[(a, b)] = pa * qb / excess
    return out


def build_gamma(mu: ProcessLaw, nu: ProcessLaw) -> Coupling:
    """Bicausal coupling used to bound the adapted weighted total variation.

    On equal prefixes the kernels are coupled by
    ``(id, id)# (mu^p ^ nu^p) + (mu^p - nu^p)+ (x) (nu^p - mu^p)+ / mass``;
    on distinct prefixes by the independent product.
    """
    _check_pair(mu, nu)
    frontier = {((), ()): 1.0}
    for _ in range(mu.horizon):
        nxt: dict = {}
        for (p, q), m in frontier.items():
            kx, ky = mu.kernels[p], nu.kernels[q]
            if p == q:
                step = _diagonal_kernel_coupling(kx, ky).items()
            else:
                step = (((a, b), pa * qb) for a, pa in kx.items() for b, qb in ky.items())
            for (a, b), w in step:
                key = (p + (a,), q + (b,))
                nxt[key] = nxt.get(key, 0.0) + m * w
        frontier = nxt
    return Coupling(frontier, mu.horizon)


def atv_weighted(mu: ProcessLaw, nu: ProcessLaw, phi: WeightFunction) -> float:
    """Adapted weighted total variation, evaluated on :func:`build_gamma`."""
    gamma = build_gamma(mu, nu)
    return math.fsum(m * (phi(x) + phi(y)) for (x, y), m in gamma.masses.items() if x != y)


def adapted_tv(mu: ProcessLaw, nu: ProcessLaw) -> float:
    """``2 inf_pi pi(x != y)`` over bicausal couplings."""
    return atv_weighted(mu, nu, WeightFunction.constant(1.0))


# ---------------------------------------------------------------------------
# decomposition measures and bounds
# ---------------------------------------------------------------------------


def gamma_j(mu: ProcessLaw, nu: ProcessLaw, j: int) -> PathMeasure:
    """The ``j``-th decomposition measure on full paths.

    ``mu_bar^{x_{1:j}}(dx_{j+1:T}) |mu^{x_{1:j-1}} - nu^{x_{1:j-1}}|(dx_j)
    (mu_{1:j-1} ^ nu_{1:j-1})(dx_{1:j-1})``. Atoms ``x_j`` outside the support
    of ``mu^{x_{1:j-1}}`` have no tail under ``mu`` and carry no mass when
    ``j < T``.
    """
    _check_pair(mu, nu)
    T = mu.horizon
    if not 1 <= j <= T:
        raise InvalidIndex(f"j={j} outside 1..{T}")
    if j == 1:
        base = {(): 1.0}
    else:
        base = dict(meet(projection(mu, j - 1), projection(nu, j - 1)).items())
    out: dict = {}
    for prefix, w in base.items():
        kx, ky = mu.kernels[prefix], nu.kernels[prefix]
        for a in dict.fromkeys([*kx, *ky]):
            diff = abs(kx.get(a, 0.0) - ky.get(a, 0.0))
            if diff == 0.0:
                continue
            head = prefix + (a,)
            if j == T:
                out[head] = out.get(head, 0.0) + w * diff
            elif a in kx:
                for suffix, s in tail_law(mu, head).items():
                    out[head + suffix] = out.get(head + suffix, 0.0) + w * diff * s
    return PathMeasure(out, T)


def lemma_rhs_terms(mu: ProcessLaw, nu: ProcessLaw, phi: WeightFunction):
    """``TV_phi(mu, nu)`` and ``[int phi d gamma^(j) for j = 1..T]``."""
    _check_pair(mu, nu)
    tv = weighted_tv(mu, nu, phi)
    return tv, [measure_integral(gamma_j(mu, nu, j), phi) for j in range(1, mu.horizon + 1)]


def psi_j(mu: ProcessLaw, phi: WeightFunction, j: int, prefix) -> float:
    """Conditional mean of ``phi`` under ``mu`` given the first ``j`` coordinates."""
    prefix = as_path(prefix)
    if len(prefix) != j or not 1 <= j <= mu.horizon:
        raise InvalidIndex(f"prefix of length {len(prefix)} for j={j}")
    if mu.prefix_mass(prefix) <= 0.0:
        raise PrefixNotSupported(f"prefix {prefix!r} is not supported by the law")
    if j == mu.horizon:
        return phi(prefix)
    return tail_law(mu, prefix).integrate(lambda s: phi(prefix + s))


def _logsumexp(logs, weights) -> float:
    logs = np.asarray(logs, dtype=float)
    weights = np.asarray(weights, dtype=float)
    top = logs.max()
    return float(top + math.log(math.fsum(weights * np.exp(logs - top))))


def psi_jensen_bound(mu: ProcessLaw, phi: WeightFunction, j: int, prefix) -> tuple[float, float]:
    """Log of both sides of ``E[e^{psi_j^2} | x_{1:j-1}] <= E[e^{phi^2} | x_{1:j-1}]``."""
    prefix = as_path(prefix)
    if len(prefix) != j - 1:
        raise InvalidIndex(f"prefix of length {len(prefix)} for j={j}")
    row = mu.kernels.get(prefix)
    if row is None:
        raise PrefixNotSupported(f"prefix {prefix!r} is not supported by the law")
    lhs = _logsumexp([psi_j(mu, phi, j, prefix + (a,)) ** 2 for a in row], list(row.values()))
    tail = tail_law(mu, prefix)
    rhs = _logsumexp([phi(prefix + s) ** 2 for s in tail], list(tail.masses.values()))
    return lhs, rhs


def gamma_j_entropy_bound(mu: ProcessLaw, nu: ProcessLaw, phi: WeightFunction, j: int,
                          *, chain_terms=None, moment=None) -> tuple[float, float]:
    """``(int phi d gamma^(j), (1 + log E_mu e^{phi^2})^{1/2} h_j^{1/2})``."""
    _check_pair(mu, nu)
    if not 1 <= j <= mu.horizon:
        raise InvalidIndex(f"j={j} outside 1..{mu.horizon}")
    lhs = measure_integral(gamma_j(mu, nu, j), phi)
    h = (chain_terms or entropy_chain_terms(nu, mu))[j - 1]
    if math.isinf(h):
        return lhs, math.inf
    L = log_exp_moment(mu, phi) if moment is None else moment
    return lhs, math.sqrt(1.0 + L) * math.sqrt(h)
