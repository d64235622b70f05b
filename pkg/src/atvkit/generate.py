"""Seeded random process-law pairs.

Each instance gets its own seed derived from ``(master seed, index)`` with
splitmix64, so a suite produces the same instances whatever the evaluation
order or the number of workers.

Atom ``i`` of every coordinate space has id ``str(i)`` and value ``i``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .process_law import PathMeasure, ProcessLaw, WeightFunction, law_from_path_measure

MASK64 = (1 << 64) - 1
MODES = ("tilt", "independent", "singular", "equal")


def splitmix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def instance_seed(master: int, index: int) -> int:
    return splitmix64((splitmix64(master & MASK64) + index) & MASK64)


def _row(rng, atoms, floor, denominator):
    k = len(atoms)
    weights = rng.dirichlet(np.ones(k))
    if denominator is None:
        probs = floor + (1.0 - k * floor) * weights
        probs = probs / probs.sum()
        return {a: float(p) for a, p in zip(atoms, probs)}
    counts = 1 + rng.multinomial(denominator - k, weights)
    return {a: int(c) / denominator for a, c in zip(atoms, counts)}


def random_law(rng: np.random.Generator, T: int, branching: int, *, keep: float = 1.0,
               floor: float = 0.05, denominator: int | None = None,
               structure: dict | None = None, prune_root: bool = False) -> ProcessLaw:
    """Random law on ``{0..b-1}^T``.

    Args:
        keep: probability that a child is kept at each node (at least one
            always is).
        floor: minimum kernel entry for float laws.
        denominator: draw kernel entries as ``k / denominator`` instead.
        structure: reuse the children sets of an existing law's kernels.
        prune_root: drop at least one root child (needs ``branching >= 2``).
    """
    atoms = [str(i) for i in range(branching)]
    kernels = {}
    frontier = [()]
    for t in range(T):
        nxt = []
        for prefix in frontier:
            if structure is not None:
                children = list(structure[prefix])
            else:
                mask = rng.random(branching) < keep
                if prune_root and t == 0:
                    mask[rng.integers(branching)] = False
                if not mask.any():
                    mask[rng.integers(branching)] = True
                children = [a for a, k in zip(atoms, mask) if k]
            if denominator is not None and denominator < len(children):
                raise ValueError("denominator smaller than the number of children")
            kernels[prefix] = _row(rng, children, floor, denominator)
            nxt.extend(prefix + (a,) for a in children)
        frontier = nxt
    values = [{a: float(i) for i, a in enumerate(atoms)} for _ in range(T)]
    spaces = [atoms for _ in range(T)]
    return ProcessLaw(kernels, T, spaces, values)


def tilt(rng: np.random.Generator, mu: ProcessLaw, strength: float | None = None) -> ProcessLaw:
    """Exponential tilt ``nu(x) ~ mu(x) exp(theta g(x))`` with random ``g``."""
    pm = mu.path_measure()
    theta = rng.uniform(0.0, 2.0) if strength is None else strength
    paths = list(pm.masses)
    g = rng.standard_normal(len(paths))
    w = np.array([pm[x] for x in paths]) * np.exp(theta * g)
    w = w / w.sum()
    m = PathMeasure(dict(zip(paths, w.tolist())), mu.horizon)
    return law_from_path_measure(m, mu.spaces, mu.values, tol=1e-9)


@dataclass(frozen=True)
class FixturePair:
    mu: ProcessLaw
    nu: ProcessLaw
    seed: int
    T: int
    branching: int
    mode: str


def random_pair(seed: int, T: int, branching: int, mode: str = "tilt", *,
                denominator: int | None = None) -> FixturePair:
    """One reproducible ``(mu, nu)`` pair.

    Modes: ``tilt`` and ``independent`` give ``nu << mu``; ``singular`` gives a
    ``nu`` charging paths outside the support of ``mu``; ``equal`` gives
    ``nu = mu``.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    rng = np.random.default_rng(seed)
    if mode == "singular":
        mu = random_law(rng, T, branching, keep=0.7, prune_root=True, denominator=denominator)
        nu = random_law(rng, T, branching, denominator=denominator)
    else:
        mu = random_law(rng, T, branching, keep=0.8, denominator=denominator)
        if mode == "equal":
            nu = mu
        elif mode == "tilt" and denominator is None:
            nu = tilt(rng, mu)
        else:
            nu = random_law(rng, T, branching, denominator=denominator,
                            structure=dict(mu.kernels))
    return FixturePair(mu, nu, seed, T, branching, mode)


def suite_instance(master: int, index: int, T_range=(1, 4), branchings=(2, 3),
                   modes=("tilt", "independent")) -> FixturePair:
    """Instance ``index`` of a suite; horizon, branching and mode are drawn
    from the instance seed."""
    seed = instance_seed(master, index)
    rng = np.random.default_rng(seed)
    T = int(rng.integers(T_range[0], T_range[1] + 1))
    b = int(branchings[rng.integers(len(branchings))])
    mode = modes[int(rng.integers(len(modes)))]
    return random_pair(seed, T, b, mode)


def random_table_phi(rng: np.random.Generator, paths, scale: int = 10, top: int = 20) -> WeightFunction:
    """Weight table with entries ``k / scale``, ``k`` uniform in ``0..top``."""
    return WeightFunction.table(
        {x: int(rng.integers(0, top + 1)) / scale for x in sorted(set(paths))},
        description="table:random",
    )
