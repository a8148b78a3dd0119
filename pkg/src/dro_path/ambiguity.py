"""Per-arc quantile ambiguity, linear expectation rows and their data-driven construction.

Every :class:`ArcAmbiguity` stores its support ``[l, u]`` as constraint 0 with
probability bounds ``[1, 1]``; the remaining entries are the baseline
quantile constraints. All intervals are closed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import A1Infeasible, A2Violation, SampleOutOfSupport
from .lp import LinearProgram, solve_lp

__all__ = [
    "QuantileConstraint",
    "ArcAmbiguity",
    "ExpectationConstraint",
    "ElementaryPartition",
    "AmbiguitySet",
    "elementary_partition",
    "validate",
    "repair",
    "hoeffding_radius",
    "quantile_from_samples",
    "expectation_from_samples",
    "bonferroni_eta",
]

_A1_TOL = 1e-9


@dataclass(frozen=True)
class QuantileConstraint:
    """``P(lo <= c <= hi)`` must lie in ``[q_lo, q_hi]``."""

    lo: float
    hi: float
    q_lo: float
    q_hi: float

    def __post_init__(self):
        for name in ("lo", "hi", "q_lo", "q_hi"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not self.lo <= self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")
        if not 0.0 <= self.q_lo <= self.q_hi <= 1.0:
            raise ValueError(f"invalid probability range [{self.q_lo}, {self.q_hi}]")

    @property
    def degenerate(self) -> bool:
        return self.q_lo == self.q_hi

    def to_dict(self) -> dict:
        return {"lo": self.lo, "hi": self.hi, "qlo": self.q_lo, "qhi": self.q_hi}

    @classmethod
    def from_dict(cls, d) -> "QuantileConstraint":
        return cls(d["lo"], d["hi"], d["qlo"], d["qhi"])


@dataclass(frozen=True)
class ArcAmbiguity:
    """Support plus quantile constraints for one arc cost.

    Use :meth:`build` to create one from a support and a list of baseline
    constraints; ``quantiles[0]`` is always the support constraint.
    """

    support: tuple[float, float]
    quantiles: tuple[QuantileConstraint, ...]

    def __post_init__(self):
        l, u = (float(x) for x in self.support)
        if not (0.0 <= l <= u < math.inf):
            raise ValueError(f"support must satisfy 0 <= l <= u < inf, got [{l}, {u}]")
        qs = tuple(self.quantiles)
        head = QuantileConstraint(l, u, 1.0, 1.0)
        if not qs or qs[0] != head:
            raise ValueError("quantiles[0] must be the support constraint")
        for q in qs[1:]:
            if q == head:
                raise ValueError("support constraint listed twice")
            if q.lo < l or q.hi > u:
                raise ValueError(f"subinterval [{q.lo}, {q.hi}] leaves the support [{l}, {u}]")
        object.__setattr__(self, "support", (l, u))
        object.__setattr__(self, "quantiles", qs)

    @classmethod
    def build(cls, lower: float, upper: float,
              constraints: Iterable[QuantileConstraint] = ()) -> "ArcAmbiguity":
        return cls((lower, upper), (QuantileConstraint(lower, upper, 1.0, 1.0), *constraints))

    @property
    def lower(self) -> float:
        return self.support[0]

    @property
    def upper(self) -> float:
        return self.support[1]

    @property
    def baselines(self) -> tuple[QuantileConstraint, ...]:
        """The non-support quantile constraints."""
        return self.quantiles[1:]

    def endpoints(self) -> tuple[np.ndarray, np.ndarray]:
        return (np.array([q.lo for q in self.quantiles]), np.array([q.hi for q in self.quantiles]))

    def with_constraints(self, constraints: Iterable[QuantileConstraint]) -> "ArcAmbiguity":
        return ArcAmbiguity.build(self.lower, self.upper, constraints)

    def to_dict(self) -> dict:
        return {"support": [self.lower, self.upper],
                "quantiles": [q.to_dict() for q in self.baselines]}

    @classmethod
    def from_dict(cls, d) -> "ArcAmbiguity":
        l, u = d["support"]
        return cls.build(l, u, [QuantileConstraint.from_dict(q) for q in d.get("quantiles", [])])


@dataclass(frozen=True)
class ExpectationConstraint:
    """One row ``sum_a coefficients[a] * E[c_a] <= rhs``."""

    coefficients: tuple[tuple[int, float], ...]
    rhs: float

    def __post_init__(self):
        items = self.coefficients.items() if isinstance(self.coefficients, Mapping) else self.coefficients
        merged: dict[int, float] = {}
        for a, v in items:
            merged[int(a)] = merged.get(int(a), 0.0) + float(v)
        coeffs = tuple(sorted((a, v) for a, v in merged.items() if v != 0.0))
        if not coeffs:
            raise ValueError("expectation row needs a nonzero coefficient")
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "rhs", float(self.rhs))

    @property
    def arcs(self) -> tuple[int, ...]:
        return tuple(a for a, _ in self.coefficients)

    def dense(self, arc_count: int) -> np.ndarray:
        row = np.zeros(arc_count)
        for a, v in self.coefficients:
            row[a] = v
        return row

    def to_dict(self) -> dict:
        return {"coeffs": {str(a): v for a, v in self.coefficients}, "rhs": self.rhs}

    @classmethod
    def from_dict(cls, d) -> "ExpectationConstraint":
        return cls(tuple((int(a), float(v)) for a, v in d["coeffs"].items()), d["rhs"])


@dataclass(frozen=True)
class ElementaryPartition:
    """Regions cut out of the support by all baseline endpoints.

    ``baseline_to_elementary[i]`` lists the regions inside constraint ``i``
    (constraint 0 is the support); ``elementary_to_baseline[j]`` lists the
    constraints containing region ``j``.
    """

    bounds: tuple[tuple[float, float], ...]
    baseline_to_elementary: tuple[tuple[int, ...], ...]
    elementary_to_baseline: tuple[tuple[int, ...], ...]

    @property
    def size(self) -> int:
        return len(self.bounds)

    @property
    def lower(self) -> np.ndarray:
        return np.array([b[0] for b in self.bounds])

    @property
    def upper(self) -> np.ndarray:
        return np.array([b[1] for b in self.bounds])

    def membership(self) -> np.ndarray:
        """Boolean matrix ``(constraints, regions)``."""
        M = np.zeros((len(self.baseline_to_elementary), self.size), dtype=bool)
        for i, js in enumerate(self.baseline_to_elementary):
            M[i, list(js)] = True
        return M


@dataclass(frozen=True)
class AmbiguitySet:
    """All per-arc ambiguities plus the linear expectation rows ``B E[c] <= b``."""

    per_arc: tuple[ArcAmbiguity, ...]
    expectation_rows: tuple[ExpectationConstraint, ...] = ()

    def __post_init__(self):
        per_arc = tuple(self.per_arc)
        rows = tuple(self.expectation_rows)
        for row in rows:
            if max(row.arcs) >= len(per_arc):
                raise ValueError("expectation row references an unknown arc")
        object.__setattr__(self, "per_arc", per_arc)
        object.__setattr__(self, "expectation_rows", rows)

    @property
    def arc_count(self) -> int:
        return len(self.per_arc)

    @property
    def lower(self) -> np.ndarray:
        return np.array([a.lower for a in self.per_arc])

    @property
    def upper(self) -> np.ndarray:
        return np.array([a.upper for a in self.per_arc])

    @property
    def B(self) -> np.ndarray:
        if not self.expectation_rows:
            return np.zeros((0, self.arc_count))
        return np.vstack([r.dense(self.arc_count) for r in self.expectation_rows])

    @property
    def b(self) -> np.ndarray:
        return np.array([r.rhs for r in self.expectation_rows], dtype=float)

    @property
    def coupled_arcs(self) -> tuple[int, ...]:
        """Arcs with a nonzero coefficient in some expectation row."""
        return tuple(sorted({a for r in self.expectation_rows for a in r.arcs}))

    def without_expectations(self) -> "AmbiguitySet":
        return AmbiguitySet(self.per_arc, ())

    def with_expectations(self, rows: Iterable[ExpectationConstraint]) -> "AmbiguitySet":
        return AmbiguitySet(self.per_arc, tuple(self.expectation_rows) + tuple(rows))

    def to_dict(self) -> dict:
        return {"arcs": {str(a): amb.to_dict() for a, amb in enumerate(self.per_arc)},
                "expectation_rows": [r.to_dict() for r in self.expectation_rows]}

    @classmethod
    def from_dict(cls, d) -> "AmbiguitySet":
        arcs = d["arcs"]
        if isinstance(arcs, Mapping):
            ids = sorted(int(k) for k in arcs)
            if ids != list(range(len(ids))):
                raise ValueError("ambiguity must cover arcs 0..|A|-1")
            per_arc = [ArcAmbiguity.from_dict(arcs[str(a)] if str(a) in arcs else arcs[a]) for a in ids]
        else:
            per_arc = [ArcAmbiguity.from_dict(x) for x in arcs]
        rows = [ExpectationConstraint.from_dict(r) for r in d.get("expectation_rows", [])]
        return cls(tuple(per_arc), tuple(rows))


def elementary_partition(a: ArcAmbiguity) -> ElementaryPartition:
    """Split the support at every baseline endpoint.

    Degenerate constraints ``[x, x]`` add a zero-width region at ``x``.

    Examples
    --------
    >>> amb = ArcAmbiguity.build(0, 100, [QuantileConstraint(20, 60, 0, 1),
    ...                                   QuantileConstraint(30, 70, 0, 1)])
    >>> elementary_partition(amb).bounds
    ((0.0, 20.0), (20.0, 30.0), (30.0, 60.0), (60.0, 70.0), (70.0, 100.0))
    """
    lo, hi = a.endpoints()
    points = np.unique(np.concatenate([lo, hi]))
    regions = {(float(p), float(q)) for p, q in zip(points[:-1], points[1:])}
    regions |= {(float(x), float(x)) for x, y in zip(lo, hi) if x == y}
    bounds = tuple(sorted(regions))
    L = np.array([b[0] for b in bounds])
    U = np.array([b[1] for b in bounds])
    inside = (lo[:, None] <= L[None, :]) & (U[None, :] <= hi[:, None])
    b2e = tuple(tuple(int(j) for j in np.flatnonzero(row)) for row in inside)
    e2b = tuple(tuple(int(i) for i in np.flatnonzero(col)) for col in inside.T)
    return ElementaryPartition(bounds, b2e, e2b)


def _a2_clashes(a: ArcAmbiguity):
    lo, hi = a.endpoints()
    eq = lo[:, None] == hi[None, :]
    np.fill_diagonal(eq, False)
    i1, i2 = np.nonzero(eq)
    return [(int(x), int(y)) for x, y in zip(i1, i2)], lo


def validate(a: ArcAmbiguity, arc: int | None = None) -> ElementaryPartition:
    """Check the endpoint condition and the strict-feasibility condition for one arc.

    The endpoint condition forbids any constraint's left endpoint from
    coinciding with another constraint's right endpoint. Strict feasibility
    asks for a probability vector over the elementary regions that meets every
    constraint, strictly inside ``(q_lo, q_hi)`` whenever that range is
    nondegenerate; it is decided by maximising a common slack.

    Returns
    -------
    ElementaryPartition
        The partition, computed on the way.

    Raises
    ------
    A2Violation
        With the clashing endpoint values.
    A1Infeasible
        When no (strictly) feasible distribution exists.
    """
    pairs, lo = _a2_clashes(a)
    if pairs:
        raise A2Violation([lo[i1] for i1, _ in pairs], pairs, arc=arc)
    part = elementary_partition(a)
    W = part.size
    # variables: delta_0..delta_{W-1}, slack t in [0, 1]
    rows = []
    ones = np.zeros(W + 1)
    ones[:W] = 1.0
    rows.append((ones, "=", 1.0))
    for i, q in enumerate(a.quantiles[1:], start=1):
        coef = np.zeros(W + 1)
        coef[list(part.baseline_to_elementary[i])] = 1.0
        if q.degenerate:
            rows.append((coef, "=", q.q_lo))
        else:
            lower = coef.copy()
            lower[W] = -1.0
            upper = coef.copy()
            upper[W] = 1.0
            rows.append((lower, ">=", q.q_lo))
            rows.append((upper, "<=", q.q_hi))
    obj = np.zeros(W + 1)
    obj[W] = 1.0
    bounds = [(0.0, None)] * W + [(0.0, 1.0)]
    sol = solve_lp(LinearProgram.from_rows(obj, rows, bounds, sense="max"))
    if not sol.optimal:
        raise A1Infeasible("no distribution satisfies the quantile constraints", arc=arc)
    if sol.objective_value <= _A1_TOL:
        raise A1Infeasible("quantile ranges admit no strictly interior distribution", arc=arc)
    return part


def repair(a: ArcAmbiguity, delta: float | None = None) -> ArcAmbiguity:
    """Nudge clashing endpoints apart by ``delta`` (default ``1e-6 * (u - l)``).

    The support never moves. Preferably the clashing left endpoint moves
    right; otherwise the clashing right endpoint moves, and a single-point
    constraint is shifted inwards as a whole.

    Raises
    ------
    A2Violation
        If the clashes cannot be separated within the support.
    """
    if delta is None:
        delta = 1e-6 * (a.upper - a.lower)
    if delta <= 0:
        raise ValueError("delta must be positive")
    qs = list(a.quantiles)
    for _ in range(4 * len(qs) + 4):
        probe = ArcAmbiguity(a.support, tuple(qs))
        pairs, lo = _a2_clashes(probe)
        if not pairs:
            return probe
        i1, i2 = pairs[0]
        q1, q2 = qs[i1], qs[i2]
        if i1 != 0 and q1.lo + delta <= q1.hi:
            qs[i1] = QuantileConstraint(q1.lo + delta, q1.hi, q1.q_lo, q1.q_hi)
        elif i2 != 0 and q2.hi + delta <= a.upper:
            qs[i2] = QuantileConstraint(q2.lo, q2.hi + delta, q2.q_lo, q2.q_hi)
        elif i2 != 0 and q2.hi - delta >= q2.lo:
            qs[i2] = QuantileConstraint(q2.lo, q2.hi - delta, q2.q_lo, q2.q_hi)
        elif i1 != 0:
            x = q1.lo - delta if q1.lo - delta >= a.lower else q1.lo + delta
            if x > a.upper:
                break
            qs[i1] = QuantileConstraint(x, x, q1.q_lo, q1.q_hi)
        else:
            break
    probe = ArcAmbiguity(a.support, tuple(qs))
    pairs, lo = _a2_clashes(probe)
    if not pairs:
        return probe
    raise A2Violation([lo[i1] for i1, _ in pairs], pairs)


def hoeffding_radius(r: int, eta: float, width: float = 1.0) -> float:
    """Radius ``eps`` with ``2 exp(-2 r eps^2 / width^2) = eta``."""
    if r < 1:
        raise ValueError("need at least one sample")
    if not 0.0 < eta < 1.0:
        raise ValueError("eta must lie in (0, 1)")
    return width * math.sqrt(math.log(2.0 / eta) / (2.0 * r))


def quantile_from_samples(hits: int, r: int, subinterval: tuple[float, float],
                          eta: float) -> QuantileConstraint:
    """Two-sided Hoeffding interval for ``P(c in subinterval)`` from ``hits`` out of ``r``."""
    if not 0 <= hits <= r:
        raise ValueError("hits must lie in [0, r]")
    eps = hoeffding_radius(r, eta)
    p = hits / r
    lo, hi = subinterval
    return QuantileConstraint(lo, hi, max(0.0, p - eps), min(1.0, p + eps))


def expectation_from_samples(totals: Sequence[float], arc_subset: Iterable[int],
                             support_lo: float, support_hi: float, eta: float
                             ) -> tuple[ExpectationConstraint, ExpectationConstraint]:
    """Rows bounding ``E[sum of arc_subset costs]`` within ``mean(totals) +- eps``.

    Returns ``(upper_row, lower_row)``; the lower bound is stored negated so
    both read ``row . E[c] <= rhs``.

    Raises
    ------
    SampleOutOfSupport
        If a total falls outside ``[support_lo, support_hi]``.
    """
    totals = np.asarray(totals, dtype=float)
    if totals.size == 0:
        raise ValueError("need at least one observed total")
    slack = 1e-9 * max(1.0, abs(support_hi))
    if np.any(totals < support_lo - slack) or np.any(totals > support_hi + slack):
        raise SampleOutOfSupport("observed total outside [l(P), u(P)]")
    arcs = sorted(set(int(a) for a in arc_subset))
    eps = hoeffding_radius(totals.size, eta, support_hi - support_lo)
    mean = float(np.mean(totals))
    upper = ExpectationConstraint(tuple((a, 1.0) for a in arcs), mean + eps)
    lower = ExpectationConstraint(tuple((a, -1.0) for a in arcs), -(mean - eps))
    return upper, lower


def bonferroni_eta(eta0: float, n1: int, arc_count: int, d0: int) -> float:
    """Per-statement violation probability when ``n1 * arc_count + d0`` statements share ``eta0``."""
    denom = n1 * arc_count + d0
    if denom <= 0:
        raise ValueError("no statements to allocate the budget to")
    return eta0 / denom
