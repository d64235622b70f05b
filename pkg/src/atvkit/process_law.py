"""Finite-support laws of discrete-time processes.

A :class:`ProcessLaw` on ``X_1 x ... x X_T`` is stored as a probability tree:
every supported prefix ``(x_1, ..., x_t)`` with ``t < T`` maps to the
conditional distribution of the next coordinate. Full paths and prefixes are
plain tuples of atom ids (strings).

Nonnegative measures on paths (meets, residuals, the decomposition measures
used by the inequality harness) are :class:`PathMeasure` instances.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from types import MappingProxyType
from typing import Callable, Iterable, Iterator, Mapping, NamedTuple, Sequence

import numpy as np

from .config import TOL
from .errors import (
    InvalidHorizon,
    InvalidParameter,
    NotProbability,
    ParseError,
    PrefixNotSupported,
    SpaceMismatch,
)

Path = tuple


class Atom(NamedTuple):
    id: str
    value: float | None = None


def as_path(prefix: Iterable) -> Path:
    if isinstance(prefix, str):
        return tuple(p for p in prefix.split("/") if p != "") if prefix else ()
    return tuple(str(a) for a in prefix)


# ---------------------------------------------------------------------------
# PathMeasure
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PathMeasure:
    """Nonnegative finite measure on paths of a fixed length.

    Zero-mass entries are dropped on construction; lookups of absent paths
    return ``0.0``.
    """

    masses: Mapping[Path, float]
    length: int

    def __post_init__(self):
        clean = {}
        for path, mass in self.masses.items():
            path = as_path(path)
            if len(path) != self.length:
                raise SpaceMismatch(
                    f"path {path!r} has length {len(path)}, expected {self.length}"
                )
            mass = float(mass)
            if mass < 0.0 or math.isnan(mass):
                raise InvalidParameter(f"negative mass {mass} at {path!r}")
            if mass > 0.0:
                clean[path] = clean.get(path, 0.0) + mass
        object.__setattr__(self, "masses", MappingProxyType(clean))

    @classmethod
    def zero(cls, length: int) -> "PathMeasure":
        return cls({}, length)

    def __getitem__(self, path) -> float:
        return self.masses.get(as_path(path), 0.0)

    def __iter__(self) -> Iterator[Path]:
        return iter(self.masses)

    def __len__(self) -> int:
        return len(self.masses)

    def items(self):
        return self.masses.items()

    def total(self) -> float:
        return math.fsum(self.masses.values())

    def integrate(self, f: Callable[[Path], float]) -> float:
        return math.fsum(m * f(x) for x, m in self.masses.items())

    def __add__(self, other: "PathMeasure") -> "PathMeasure":
        _check_same_length(self, other)
        out = dict(self.masses)
        for x, m in other.items():
            out[x] = out.get(x, 0.0) + m
        return PathMeasure(out, self.length)

    def scaled(self, c: float) -> "PathMeasure":
        return PathMeasure({x: c * m for x, m in self.items()}, self.length)

    def allclose(self, other: "PathMeasure", atol: float = TOL.equality) -> bool:
        if self.length != other.length:
            return False
        keys = dict.fromkeys([*self.masses, *other.masses])
        return all(abs(self[k] - other[k]) <= atol for k in keys)


def _check_same_length(a: PathMeasure, b: PathMeasure) -> None:
    if a.length != b.length:
        raise SpaceMismatch(f"path lengths differ: {a.length} vs {b.length}")


def meet(a: PathMeasure, b: PathMeasure) -> PathMeasure:
    """Pointwise minimum ``a ^ b``. Paths missing from one side count as 0."""
    _check_same_length(a, b)
    return PathMeasure({x: min(m, b[x]) for x, m in a.items() if x in b.masses}, a.length)


def residual_parts(a: PathMeasure, b: PathMeasure):
    """Return ``((a-b)+, (b-a)+, |a-b|)``."""
    _check_same_length(a, b)
    pos, neg = {}, {}
    # insertion order keeps downstream float sums reproducible
    for x in dict.fromkeys([*a.masses, *b.masses]):
        diff = a[x] - b[x]
        if diff > 0.0:
            pos[x] = diff
        elif diff < 0.0:
            neg[x] = -diff
    absd = dict(pos)
    absd.update(neg)
    n = a.length
    return PathMeasure(pos, n), PathMeasure(neg, n), PathMeasure(absd, n)


# ---------------------------------------------------------------------------
# ProcessLaw
# ---------------------------------------------------------------------------


class ProcessLaw:
    """Law of a ``T``-step process with finite support, stored as kernels.

    Args:
        kernels: prefix -> {atom: probability}. Prefixes may be tuples or
            ``/``-joined strings; the root is ``()`` or ``""``.
        horizon: number of steps ``T``. Inferred from the deepest prefix when
            omitted.
        spaces: atom ids of each coordinate space. Inferred from the kernels
            when omitted; may list atoms carrying no mass.
        values: optional numeric coordinate for every atom, one mapping per
            coordinate space.

    Zero-probability children are pruned, and kernels stored under prefixes
    that are unreachable afterwards are discarded.
    """

    def __init__(
        self,
        kernels: Mapping,
        horizon: int | None = None,
        spaces: Sequence[Sequence[str]] | None = None,
        values: Sequence[Mapping[str, float]] | None = None,
        *,
        tol: float = TOL.law_sum,
    ):
        raw = {}
        for prefix, row in kernels.items():
            raw[as_path(prefix)] = {str(a): float(p) for a, p in row.items()}
        if horizon is None:
            horizon = 1 + max((len(p) for p in raw), default=0)
        if horizon < 1:
            raise InvalidHorizon(f"horizon must be >= 1, got {horizon}")
        self._horizon = int(horizon)
        T = self._horizon

        for prefix in raw:
            if len(prefix) >= T:
                raise InvalidHorizon(f"kernel stored at prefix {prefix!r} of length >= T={T}")

        stored = {}
        frontier = [()]
        while frontier:
            prefix = frontier.pop()
            if prefix not in raw:
                raise NotProbability(f"reachable prefix {prefix!r} has no kernel")
            row = {}
            for atom, p in raw[prefix].items():
                if p < 0.0 or math.isnan(p):
                    raise NotProbability(f"negative probability {p} at {prefix!r}/{atom}")
                if p > 0.0:
                    row[atom] = p
            total = math.fsum(row.values())
            if abs(total - 1.0) > tol:
                raise NotProbability(f"kernel at {prefix!r} sums to {total!r}")
            stored[prefix] = MappingProxyType(row)
            if len(prefix) + 1 < T:
                frontier.extend(prefix + (a,) for a in row)
        self._kernels = MappingProxyType(stored)

        seen = [dict() for _ in range(T)]
        for prefix, row in stored.items():
            for atom in row:
                seen[len(prefix)][atom] = None
        if spaces is None:
            self._spaces = tuple(tuple(s) for s in seen)
        else:
            if len(spaces) != T:
                raise SpaceMismatch(f"{len(spaces)} coordinate spaces for horizon {T}")
            self._spaces = tuple(tuple(str(a) for a in s) for s in spaces)
            for t, s in enumerate(self._spaces):
                if len(set(s)) != len(s):
                    raise ParseError(f"duplicate atom ids in space {t + 1}")
                missing = set(seen[t]) - set(s)
                if missing:
                    raise SpaceMismatch(
                        f"atoms {sorted(missing)} used in coordinate {t + 1} but not declared"
                    )
        for s in self._spaces:
            for a in s:
                if a == "" or "/" in a:
                    raise ParseError(f"invalid atom id {a!r}")

        if values is None:
            self._values = None
        else:
            if len(values) != T:
                raise SpaceMismatch(f"{len(values)} value tables for horizon {T}")
            vals = []
            for t, table in enumerate(values):
                table = {str(a): float(v) for a, v in table.items()}
                missing = set(self._spaces[t]) - set(table)
                if missing:
                    raise ParseError(f"no value for atoms {sorted(missing)} in space {t + 1}")
                vals.append(MappingProxyType(table))
            self._values = tuple(vals)

    # -- basic accessors ---------------------------------------------------

    @property
    def horizon(self) -> int:
        return self._horizon

    @property
    def kernels(self) -> Mapping[Path, Mapping[str, float]]:
        return self._kernels

    @property
    def spaces(self) -> tuple:
        return self._spaces

    @property
    def values(self):
        return self._values

    def atoms(self, t: int) -> tuple[Atom, ...]:
        """Atoms of the coordinate space ``X_t`` (1-based)."""
        if not 1 <= t <= self._horizon:
            raise InvalidHorizon(f"t={t} outside 1..{self._horizon}")
        vals = self._values[t - 1] if self._values is not None else {}
        return tuple(Atom(a, vals.get(a)) for a in self._spaces[t - 1])

    # -- derived measures --------------------------------------------------

    @cached_property
    def _prefix_masses(self) -> dict:
        masses = {(): 1.0}
        order = sorted(self._kernels, key=len)
        for prefix in order:
            base = masses[prefix]
            for atom, p in self._kernels[prefix].items():
                masses[prefix + (atom,)] = base * p
        return masses

    def prefix_mass(self, prefix) -> float:
        return self._prefix_masses.get(as_path(prefix), 0.0)

    def nodes(self, t: int) -> list[Path]:
        """Supported prefixes of length ``t`` (0 <= t <= T)."""
        if not 0 <= t <= self._horizon:
            raise InvalidHorizon(f"t={t} outside 0..{self._horizon}")
        return [p for p in self._prefix_masses if len(p) == t]

    @cached_property
    def _path_measure(self) -> PathMeasure:
        T = self._horizon
        return PathMeasure(
            {p: m for p, m in self._prefix_masses.items() if len(p) == T}, T
        )

    def path_measure(self) -> PathMeasure:
        return self._path_measure

    def support(self) -> list[Path]:
        return list(self._path_measure.masses)

    def __repr__(self):
        return f"ProcessLaw(horizon={self._horizon}, paths={len(self._path_measure)})"


def kernel(law: ProcessLaw, prefix) -> Mapping[str, float]:
    """Conditional law of the next coordinate given ``prefix``."""
    prefix = as_path(prefix)
    if len(prefix) >= law.horizon:
        raise InvalidHorizon(f"prefix of length {len(prefix)} has no kernel for T={law.horizon}")
    try:
        return law.kernels[prefix]
    except KeyError:
        raise PrefixNotSupported(f"prefix {prefix!r} is not supported by the law") from None


def tail_law(law: ProcessLaw, prefix) -> PathMeasure:
    """Conditional law of the remaining coordinates given ``prefix``."""
    prefix = as_path(prefix)
    T = law.horizon
    if len(prefix) > T or law.prefix_mass(prefix) <= 0.0:
        raise PrefixNotSupported(f"prefix {prefix!r} is not supported by the law")
    out = {(): 1.0}
    for _ in range(T - len(prefix)):
        nxt = {}
        for suffix, m in out.items():
            for atom, p in law.kernels[prefix + suffix].items():
                nxt[suffix + (atom,)] = m * p
        out = nxt
    return PathMeasure(out, T - len(prefix))


def projection(law: ProcessLaw, t: int) -> PathMeasure:
    """Marginal of the first ``t`` coordinates."""
    if not 1 <= t <= law.horizon:
        raise InvalidHorizon(f"t={t} outside 1..{law.horizon}")
    return PathMeasure({p: law.prefix_mass(p) for p in law.nodes(t)}, t)


def law_from_path_measure(
    m: PathMeasure,
    spaces: Sequence[Sequence[str]] | None = None,
    values: Sequence[Mapping[str, float]] | None = None,
    *,
    tol: float = TOL.law_sum,
) -> ProcessLaw:
    """Disintegrate a probability measure on full paths into kernels."""
    total = m.total()
    if abs(total - 1.0) > tol:
        raise NotProbability(f"measure has mass {total!r}")
    if m.length < 1:
        raise InvalidHorizon("paths must have length >= 1")
    prefix_mass: dict = {}
    for path, mass in m.items():
        for t in range(m.length):
            prefix_mass[path[:t]] = prefix_mass.get(path[:t], 0.0) + mass
    kernels: dict = {}
    for path in m:
        for t in range(m.length):
            kernels.setdefault(path[:t], {})[path[t]] = prefix_mass.get(path[: t + 1], m[path])
    for prefix, row in kernels.items():
        s = math.fsum(row.values())
        kernels[prefix] = {a: q / s for a, q in row.items()}
    return ProcessLaw(kernels, m.length, spaces, values)


def product_law(marginals: Sequence[Mapping[str, float]], values=None) -> ProcessLaw:
    """Law with independent coordinates ``marginals[0] x marginals[1] x ...``."""
    T = len(marginals)
    kernels = {(): dict(marginals[0])}
    frontier = [()]
    for t in range(1, T):
        frontier = [p + (a,) for p in frontier for a, q in marginals[t - 1].items() if q > 0]
        for p in frontier:
            kernels[p] = dict(marginals[t])
    return ProcessLaw(kernels, T, values=values)


def dirac(path, values=None) -> ProcessLaw:
    path = as_path(path)
    return ProcessLaw({path[:t]: {path[t]: 1.0} for t in range(len(path))}, len(path), values=values)


# ---------------------------------------------------------------------------
# serialisation
# ---------------------------------------------------------------------------


def save_law(law: ProcessLaw) -> str:
    doc = {
        "horizon": law.horizon,
        "spaces": [list(s) for s in law.spaces],
        "kernels": {"/".join(p): dict(row) for p, row in sorted(law.kernels.items())},
    }
    if law.values is not None:
        doc["values"] = [dict(v) for v in law.values]
    return json.dumps(doc, indent=2)


def load_law(text: str) -> ProcessLaw:
    """Parse a law document.

    Rows deviating from unit mass by more than ``1e-9`` are rejected; rows
    within that tolerance are renormalised before construction.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object")
    for key in ("horizon", "kernels"):
        if key not in doc:
            raise ParseError(f"missing field {key!r}")
    T = doc["horizon"]
    if not isinstance(T, int) or isinstance(T, bool) or T < 1:
        raise ParseError(f"field 'horizon': expected integer >= 1, got {T!r}")
    spaces = doc.get("spaces")
    if spaces is not None:
        if not isinstance(spaces, list) or len(spaces) != T or not all(
            isinstance(s, list) for s in spaces
        ):
            raise ParseError("field 'spaces': expected one list of atom ids per coordinate")
        spaces = [[str(a) for a in s] for s in spaces]
    kernels_doc = doc["kernels"]
    if not isinstance(kernels_doc, dict):
        raise ParseError("field 'kernels': expected an object")
    kernels = {}
    for key, row in kernels_doc.items():
        where = f"kernels[{key!r}]"
        if not isinstance(row, dict) or not row:
            raise ParseError(f"{where}: expected a non-empty object of probabilities")
        probs = {}
        for atom, p in row.items():
            if not isinstance(p, (int, float)) or isinstance(p, bool):
                raise ParseError(f"{where}[{atom!r}]: not a number")
            if p < 0:
                raise ParseError(f"{where}[{atom!r}]: negative probability {p}")
            probs[str(atom)] = float(p)
        total = math.fsum(probs.values())
        if abs(total - 1.0) > TOL.parse_sum:
            raise ParseError(f"{where}: probabilities sum to {total!r}")
        kernels[as_path(key)] = {a: p / total for a, p in probs.items()}
    values = doc.get("values")
    if values is not None:
        if not isinstance(values, list) or len(values) != T:
            raise ParseError("field 'values': expected one object per coordinate")
    try:
        return ProcessLaw(kernels, T, spaces, values)
    except ParseError:
        raise
    except (NotProbability, InvalidHorizon, SpaceMismatch, ValueError) as exc:
        raise ParseError(str(exc)) from None


# ---------------------------------------------------------------------------
# metrics and weights
# ---------------------------------------------------------------------------


COMBINE_RULES = ("l1", "max")


class PathMetric:
    """Metric on full paths built from per-coordinate ground metrics.

    Coordinates are combined by the l1 sum (default) or by the maximum. A
    ground metric is either tabulated over atom ids or the absolute difference
    of atom values.
    """

    def __init__(self, ground: Sequence[Callable[[object, object], float]], combine="l1", *,
                 values=None, description=None):
        if combine not in COMBINE_RULES:
            raise InvalidParameter(f"unknown combination rule {combine!r}")
        self.ground = tuple(ground)
        self.combine = combine
        self._values = values
        self.description = description or combine

    @classmethod
    def from_values(cls, values: Sequence[Mapping[str, float]], combine="l1") -> "PathMetric":
        values = tuple({str(a): float(v) for a, v in table.items()} for table in values)

        def make(table):
            def d(a, b):
                va = table[a] if isinstance(a, str) else float(a)
                vb = table[b] if isinstance(b, str) else float(b)
                return abs(va - vb)
            return d

        return cls([make(t) for t in values], combine, values=values,
                   description=f"{combine}:values")

    @classmethod
    def from_tables(cls, tables: Sequence[Mapping[tuple, float]], combine="l1",
                    *, atol: float = 1e-12) -> "PathMetric":
        """Tabulated ground metrics; axioms are checked on construction."""
        grounds = []
        for t, table in enumerate(tables):
            full = {}
            atoms = set()
            for (a, b), v in table.items():
                a, b = str(a), str(b)
                atoms.update((a, b))
                if (b, a) in full and abs(full[(b, a)] - v) > atol:
                    raise InvalidParameter(f"coordinate {t + 1}: d({a},{b}) not symmetric")
                full[(a, b)] = full[(b, a)] = float(v)
            for a in atoms:
                if abs(full.setdefault((a, a), 0.0)) > atol:
                    raise InvalidParameter(f"coordinate {t + 1}: d({a},{a}) != 0")
            for a in atoms:
                for b in atoms:
                    if (a, b) not in full:
                        raise InvalidParameter(f"coordinate {t + 1}: d({a},{b}) missing")
            for a in atoms:
                for b in atoms:
                    if full[(a, b)] < 0:
                        raise InvalidParameter(f"coordinate {t + 1}: negative d({a},{b})")
                    for c in atoms:
                        if full[(a, c)] > full[(a, b)] + full[(b, c)] + atol:
                            raise InvalidParameter(
                                f"coordinate {t + 1}: triangle inequality fails at {a},{b},{c}"
                            )
            grounds.append(lambda a, b, full=full: full[(a, b)])
        return cls(grounds, combine, description=f"{combine}:tables")

    @classmethod
    def for_laws(cls, *laws: ProcessLaw, combine="l1") -> "PathMetric":
        """Value-based metric using the atom values carried by ``laws``."""
        T = laws[0].horizon
        merged = [dict() for _ in range(T)]
        for law in laws:
            if law.horizon != T:
                raise SpaceMismatch("laws have different horizons")
            if law.values is None:
                raise InvalidParameter("law carries no atom values; supply metric tables")
            for t, table in enumerate(law.values):
                for a, v in table.items():
                    if a in merged[t] and merged[t][a] != v:
                        raise SpaceMismatch(f"atom {a!r} has conflicting values in coordinate {t + 1}")
                    merged[t][a] = v
        return cls.from_values(merged, combine)

    def coordinate(self, t: int, a, b) -> float:
        return self.ground[t](a, b)

    def __call__(self, x, y) -> float:
        if len(x) != len(y) or len(x) != len(self.ground):
            raise SpaceMismatch(f"paths of length {len(x)}, {len(y)} for a metric on {len(self.ground)} coordinates")
        parts = [g(a, b) for g, a, b in zip(self.ground, x, y)]
        return math.fsum(parts) if self.combine == "l1" else max(parts, default=0.0)

    def pairwise(self, xs: Sequence[Path], ys: Sequence[Path]) -> np.ndarray:
        """Distance matrix between two lists of paths."""
        if self._values is not None and xs and ys:
            T = len(self.ground)
            vx = np.array([[self._values[t][a] for t, a in enumerate(x)] for x in xs]).reshape(len(xs), T)
            vy = np.array([[self._values[t][a] for t, a in enumerate(y)] for y in ys]).reshape(len(ys), T)
            diff = np.abs(vx[:, None, :] - vy[None, :, :])
            return diff.sum(axis=2) if self.combine == "l1" else diff.max(axis=2)
        return np.array([[self(x, y) for y in ys] for x in xs], dtype=float).reshape(len(xs), len(ys))

    def __repr__(self):
        return f"PathMetric({self.description})"


class WeightFunction:
    """Nonnegative weight on full paths.

    Three forms are supported: a table ``path -> weight``, a constant, and the
    metric rule ``sqrt(alpha) * d(x, x0) ** p``. For the rule, ``x0`` is a path
    of atom ids or, with a value-based metric, a numeric vector; it defaults to
    the origin.
    """

    def __init__(self, fn: Callable[[Path], float], description: str, *, kind: str, params=None):
        self._fn = fn
        self.description = description
        self.kind = kind
        self.params = params or {}

    @classmethod
    def table(cls, mapping: Mapping, description="table") -> "WeightFunction":
        table = {as_path(k): float(v) for k, v in mapping.items()}
        for k, v in table.items():
            if v < 0 or math.isnan(v):
                raise InvalidParameter(f"negative weight {v} at {k!r}")

        def fn(x):
            try:
                return table[x]
            except KeyError:
                raise InvalidParameter(f"weight table has no entry for path {x!r}") from None

        return cls(fn, description, kind="table", params={"table": table})

    @classmethod
    def constant(cls, c: float) -> "WeightFunction":
        c = float(c)
        if c < 0 or math.isnan(c):
            raise InvalidParameter(f"constant weight must be >= 0, got {c}")
        return cls(lambda x: c, f"const:{c!r}", kind="const", params={"c": c})

    @classmethod
    def rule(cls, alpha: float, p: float, metric: PathMetric, x0=None) -> "WeightFunction":
        alpha, p = float(alpha), float(p)
        if not alpha > 0:
            raise InvalidParameter(f"alpha must be > 0, got {alpha}")
        if not p >= 1:
            raise InvalidParameter(f"p must be >= 1, got {p}")
        scale = math.sqrt(alpha)

        def fn(x):
            base = x0 if x0 is not None else (0.0,) * len(x)
            return scale * metric(x, base) ** p

        desc = f"rule:{alpha!r},{p!r}"
        return cls(fn, desc, kind="rule", params={"alpha": alpha, "p": p, "x0": x0, "metric": metric})

    def __call__(self, x) -> float:
        return self._fn(as_path(x))

    def scaled(self, c: float) -> "WeightFunction":
        """The weight ``c * phi`` for ``c >= 0``."""
        if c < 0:
            raise InvalidParameter("scale must be nonnegative")
        fn = self._fn
        return WeightFunction(lambda x: c * fn(x), f"{c!r}*{self.description}", kind="scaled")

    def __repr__(self):
        return f"WeightFunction({self.description})"
