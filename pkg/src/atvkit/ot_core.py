"""Exact dense optimal transport by the transportation simplex.

The solver keeps a spanning-tree basis of ``m + n - 1`` cells. It starts from
the north-west corner rule and prices cells with the tree potentials ``u, v``.
The entering cell is the most negative reduced cost (``pivot="dantzig"``) or
the lowest flat index among improving cells (``pivot="bland"``); ties are
always broken by lowest index, for the leaving cell as well. Degenerate bases are avoided by perturbing
the marginals (``a_i + eps``, ``b_n + m * eps``); once optimal, the flows are
recomputed on the final tree from the unperturbed marginals, so the reported
plan carries no trace of the perturbation.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .config import TOL
from .errors import MarginalMismatch, SpaceMismatch
from .process_law import PathMetric, ProcessLaw


@dataclass(frozen=True)
class TransportProblem:
    cost: np.ndarray
    source: np.ndarray
    target: np.ndarray

    def __post_init__(self):
        cost = np.asarray(self.cost, dtype=float)
        source = np.asarray(self.source, dtype=float).ravel()
        target = np.asarray(self.target, dtype=float).ravel()
        if cost.shape != (source.size, target.size):
            raise SpaceMismatch(f"cost shape {cost.shape} vs marginals {source.size}x{target.size}")
        if source.size == 0 or target.size == 0:
            raise SpaceMismatch("empty marginal")
        if np.any(source < 0) or np.any(target < 0):
            raise MarginalMismatch("negative marginal entry")
        if abs(source.sum() - target.sum()) > 1e-9:
            raise MarginalMismatch(f"marginal masses differ: {source.sum()!r} vs {target.sum()!r}")
        object.__setattr__(self, "cost", cost)
        object.__setattr__(self, "source", source)
        object.__setattr__(self, "target", target)


@dataclass(frozen=True)
class TransportPlan:
    plan: np.ndarray
    value: float
    u: np.ndarray
    v: np.ndarray
    basis: tuple
    pivots: int

    def certificate_gap(self, cost: np.ndarray) -> float:
        """Largest violation of dual feasibility ``u_i + v_j <= c_ij``."""
        return float(np.max(self.u[:, None] + self.v[None, :] - cost, initial=0.0))


def _potentials(cost, m, n, adj):
    u = np.full(m, np.nan)
    v = np.full(n, np.nan)
    u[0] = 0.0
    queue = deque([0])  # nodes: rows 0..m-1, columns m..m+n-1
    while queue:
        node = queue.popleft()
        if node < m:
            for col in adj[node]:
                j = col - m
                if math.isnan(v[j]):
                    v[j] = cost[node, j] - u[node]
                    queue.append(col)
        else:
            j = node - m
            for i in adj[node]:
                if math.isnan(u[i]):
                    u[i] = cost[i, j] - v[j]
                    queue.append(i)
    return u, v


def _tree_path(adj, start, goal):
    """Node path between two nodes of the basis tree."""
    parent = {start: None}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        if node == goal:
            break
        for nb in adj[node]:
            if nb not in parent:
                parent[nb] = node
                queue.append(nb)
    path = [goal]
    while path[-1] != start:
        path.append(parent[path[-1]])
    return path[::-1]


def _flows_on_tree(basis, m, n, a, b):
    """Solve the basic flows on a spanning tree by leaf elimination."""
    adj = [set() for _ in range(m + n)]
    for i, j in basis:
        adj[i].add(m + j)
        adj[m + j].add(i)
    rest = np.concatenate([a, b]).astype(float)
    flows = {}
    degree = [len(s) for s in adj]
    leaves = deque(k for k in range(m + n) if degree[k] == 1)
    done = set()
    while leaves:
        leaf = leaves.popleft()
        if leaf in done or degree[leaf] != 1:
            continue
        (other,) = [k for k in adj[leaf] if k not in done]
        f = rest[leaf]
        cell = (leaf, other - m) if leaf < m else (other, leaf - m)
        flows[cell] = f
        rest[other] -= f
        done.add(leaf)
        degree[other] -= 1
        degree[leaf] = 0
        if degree[other] == 1:
            leaves.append(other)
    return flows


def solve_transport(problem: TransportProblem, *, pivot: str = "dantzig",
                    eps: float | None = None, max_pivots: int = 1_000_000) -> TransportPlan:
    """Solve ``min <C, P>`` over couplings ``P`` of ``source`` and ``target``."""
    c = problem.cost
    a = problem.source
    b = problem.target
    m, n = c.shape
    # equalise masses exactly so the tree solve closes
    b = b * (a.sum() / b.sum())
    if eps is None:
        eps = 1e-9 / (m + n)

    ap = a + eps
    bp = b.copy()
    bp[-1] += m * eps

    # north-west corner
    basis = []
    flow = {}
    i = j = 0
    ra, rb = ap.copy(), bp.copy()
    while True:
        f = min(ra[i], rb[j])
        basis.append((i, j))
        flow[(i, j)] = f
        ra[i] -= f
        rb[j] -= f
        if i == m - 1 and j == n - 1:
            break
        if (ra[i] <= rb[j] and i < m - 1) or j == n - 1:
            i += 1
        else:
            j += 1
    assert len(basis) == m + n - 1

    adj = [set() for _ in range(m + n)]
    for (i, j) in basis:
        adj[i].add(m + j)
        adj[m + j].add(i)

    scale = max(1.0, float(np.abs(c).max(initial=0.0)))
    tol = 1e-12 * scale
    pivots = 0
    while True:
        u, v = _potentials(c, m, n, adj)
        reduced = c - u[:, None] - v[None, :]
        improving = np.flatnonzero(reduced.ravel() < -tol)
        if improving.size == 0:
            break
        if pivots >= max_pivots:
            raise RuntimeError("transportation simplex exceeded the pivot limit")
        pivots += 1
        if pivot == "bland":
            k = int(improving[0])
        else:
            flat = reduced.ravel()
            k = int(improving[np.argmin(flat[improving])])
        ei, ej = divmod(k, n)
        # cycle: entering cell, then alternate along the tree path col -> row
        nodes = _tree_path(adj, m + ej, ei)
        cells = []
        for k in range(len(nodes) - 1):
            x, y = nodes[k], nodes[k + 1]
            cells.append((y, x - m) if x >= m else (x, y - m))
        # cells[0] touches column ej: it loses flow; signs alternate
        minus = cells[0::2]
        plus = cells[1::2]
        theta = min(flow[cell] for cell in minus)
        leaving = min(
            (cell for cell in minus if flow[cell] == theta),
            key=lambda cell: cell[0] * n + cell[1],
        )
        for cell in minus:
            flow[cell] -= theta
        for cell in plus:
            flow[cell] += theta
        flow[(ei, ej)] = theta
        del flow[leaving]
        li, lj = leaving
        adj[li].discard(m + lj)
        adj[m + lj].discard(li)
        adj[ei].add(m + ej)
        adj[m + ej].add(ei)

    basis = tuple(sorted(flow))
    exact = _flows_on_tree(basis, m, n, a, b)
    plan = np.zeros((m, n))
    for (i, j), f in exact.items():
        plan[i, j] = max(f, 0.0)
    value = math.fsum((plan * c).ravel())
    return TransportPlan(plan=plan, value=value, u=u, v=v, basis=basis, pivots=pivots)


def transport_value(cost, source, target) -> float:
    return solve_transport(TransportProblem(cost, source, target)).value


def wasserstein(mu: ProcessLaw, nu: ProcessLaw, metric: PathMetric | None = None,
                p: float = 1.0) -> float:
    """``W_p(mu, nu)`` over full paths with cost ``d(x, y) ** p``."""
    if mu.horizon != nu.horizon:
        raise SpaceMismatch(f"horizons differ: {mu.horizon} vs {nu.horizon}")
    if metric is None:
        metric = PathMetric.for_laws(mu, nu)
    xs = mu.support()
    ys = nu.support()
    a = np.array([mu.path_measure()[x] for x in xs])
    b = np.array([nu.path_measure()[y] for y in ys])
    cost = metric.pairwise(xs, ys) ** p
    value = solve_transport(TransportProblem(cost, a, b)).value
    return max(value, 0.0) ** (1.0 / p)
