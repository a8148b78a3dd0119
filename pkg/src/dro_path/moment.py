"""Worst- and best-case expected arc costs over a quantile ambiguity set."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ambiguity import AmbiguitySet, ArcAmbiguity, ElementaryPartition, validate
from .errors import DroPathError, NumericalFailure
from .lp import LinearProgram, LpSolution, solve_lp

__all__ = [
    "DiscreteDistribution",
    "CostBounds",
    "moment_lp",
    "moment_dual_lp",
    "worst_case_cost",
    "best_case_cost",
    "worst_case_costs",
    "bounds_all",
]

_MASS_TOL = 1e-12


@dataclass(frozen=True)
class DiscreteDistribution:
    """Finitely many atoms. ``regions[k]`` names the elementary region atom ``k`` stands for.

    An atom at a region endpoint represents mass pushed towards that endpoint
    from inside the region, so constraint membership is decided per region
    rather than by the atom's value.
    """

    values: tuple[float, ...]
    masses: tuple[float, ...]
    regions: tuple[int, ...]

    def __post_init__(self):
        if not len(self.values) == len(self.masses) == len(self.regions):
            raise ValueError("values, masses and regions must align")
        m = np.asarray(self.masses, dtype=float)
        if np.any(m < -1e-12) or abs(m.sum() - 1.0) > 1e-9:
            raise ValueError("masses must be nonnegative and sum to 1")

    @property
    def atoms(self) -> list[tuple[float, float]]:
        """``(value, mass)`` pairs with masses of equal values merged."""
        merged: dict[float, float] = {}
        for v, p in zip(self.values, self.masses):
            merged[v] = merged.get(v, 0.0) + p
        return sorted(merged.items())

    @property
    def mean(self) -> float:
        return math.fsum(v * p for v, p in zip(self.values, self.masses))

    def constraint_probabilities(self, partition: ElementaryPartition) -> np.ndarray:
        """Probability of each quantile constraint's interval, support first."""
        mass = np.zeros(partition.size)
        for j, p in zip(self.regions, self.masses):
            mass[j] += p
        return np.array([math.fsum(mass[list(js)]) for js in partition.baseline_to_elementary])


@dataclass(frozen=True)
class CostBounds:
    """Per-arc best-case and worst-case expected costs."""

    c_min: np.ndarray
    c_max: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.c_min, dtype=float).copy()
        hi = np.asarray(self.c_max, dtype=float).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("c_min and c_max must be vectors of equal length")
        if np.any(lo > hi + 1e-9):
            raise ValueError("c_min exceeds c_max")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "c_min", lo)
        object.__setattr__(self, "c_max", hi)

    def __len__(self):
        return self.c_max.size


def moment_lp(a: ArcAmbiguity, partition: ElementaryPartition, sense: str = "max") -> LinearProgram:
    """Primal moment problem over region masses.

    ``max`` places each region's mass at its right endpoint, ``min`` at its left one.
    """
    values = partition.upper if sense == "max" else partition.lower
    W = partition.size
    rows = [(np.ones(W), "=", 1.0)]
    for i, q in enumerate(a.quantiles[1:], start=1):
        coef = np.zeros(W)
        coef[list(partition.baseline_to_elementary[i])] = 1.0
        if q.degenerate:
            rows.append((coef, "=", q.q_lo))
        else:
            if q.q_lo > 0.0:
                rows.append((coef, ">=", q.q_lo))
            if q.q_hi < 1.0:
                rows.append((coef, "<=", q.q_hi))
    return LinearProgram.from_rows(values, rows, sense=sense)


def moment_dual_lp(a: ArcAmbiguity, partition: ElementaryPartition, sense: str = "max") -> LinearProgram:
    """Dual of :func:`moment_lp` in the multipliers ``(k_i, h_i)`` of every constraint.

    For ``sense="max"`` this minimises ``sum(q_hi k - q_lo h)`` subject to
    ``sum_{i containing j} (k_i - h_i) >= U_j``; for ``"min"`` it maximises
    ``-sum(q_hi k - q_lo h)`` subject to ``sum (k_i - h_i) + L_j >= 0``.
    Variables are ordered ``k_0..k_D, h_0..h_D``.
    """
    D = len(a.quantiles)
    q_lo = np.array([q.q_lo for q in a.quantiles])
    q_hi = np.array([q.q_hi for q in a.quantiles])
    M = partition.membership().T.astype(float)
    A = np.hstack([M, -M])
    if sense == "max":
        c = np.concatenate([q_hi, -q_lo])
        rhs = partition.upper
        out_sense = "min"
    else:
        c = -np.concatenate([q_hi, -q_lo])
        rhs = -partition.lower
        out_sense = "max"
    rels = [">="] * partition.size
    return LinearProgram(c, A, rels, rhs, np.zeros(2 * D), np.full(2 * D, np.inf), sense=out_sense)


def _solve(a: ArcAmbiguity, sense: str, partition: ElementaryPartition | None,
           arc: int | None) -> tuple[float, DiscreteDistribution, LpSolution]:
    part = validate(a, arc=arc) if partition is None else partition
    sol = solve_lp(moment_lp(a, part, sense))
    if not sol.optimal:
        raise NumericalFailure(f"moment LP ended with status {sol.status}")
    x = np.clip(sol.x, 0.0, None)
    x /= x.sum()
    keep = np.flatnonzero(x > _MASS_TOL)
    ends = part.upper if sense == "max" else part.lower
    dist = DiscreteDistribution(tuple(float(ends[j]) for j in keep),
                                tuple(float(x[j]) for j in keep),
                                tuple(int(j) for j in keep))
    value = min(max(float(sol.objective_value), a.lower), a.upper)
    return value, dist, sol


def worst_case_cost(a: ArcAmbiguity, *, partition: ElementaryPartition | None = None,
                    arc: int | None = None) -> tuple[float, DiscreteDistribution]:
    """Largest expected cost over all distributions meeting the arc's constraints.

    The arc is validated first unless a precomputed ``partition`` is passed.

    Examples
    --------
    >>> from dro_path.ambiguity import QuantileConstraint
    >>> amb = ArcAmbiguity.build(0, 100, [QuantileConstraint(70, 100, 0.0, 0.1)])
    >>> value, dist = worst_case_cost(amb)
    >>> round(value, 9), dist.atoms
    (73.0, [(70.0, 0.9), (100.0, 0.1)])
    """
    value, dist, _ = _solve(a, "max", partition, arc)
    return value, dist


def best_case_cost(a: ArcAmbiguity, *, partition: ElementaryPartition | None = None,
                   arc: int | None = None) -> tuple[float, DiscreteDistribution]:
    """Smallest expected cost over all distributions meeting the arc's constraints."""
    value, dist, _ = _solve(a, "min", partition, arc)
    return value, dist


def _collect(amb: AmbiguitySet, senses: tuple[str, ...]) -> dict[str, np.ndarray]:
    out = {s: np.empty(amb.arc_count) for s in senses}
    failures: list[tuple[int, DroPathError]] = []
    for arc, a in enumerate(amb.per_arc):
        if len(a.quantiles) == 1:
            if "min" in out:
                out["min"][arc] = a.lower
            if "max" in out:
                out["max"][arc] = a.upper
            continue
        try:
            part = validate(a, arc=arc)
            for s in senses:
                out[s][arc] = _solve(a, s, part, arc)[0]
        except DroPathError as exc:
            failures.append((arc, exc))
    if failures:
        first = failures[0][1]
        detail = "; ".join(f"arc {arc}: {exc}" for arc, exc in failures)
        err = type(first)(detail) if not hasattr(first, "endpoints") else first
        err.failures = failures
        raise err
    return out


def worst_case_costs(amb: AmbiguitySet) -> np.ndarray:
    """Per-arc worst-case expected costs only."""
    return _collect(amb, ("max",))["max"]


def bounds_all(amb: AmbiguitySet) -> CostBounds:
    """Best- and worst-case expected cost of every arc.

    Raises the first arc's error type; its ``failures`` attribute lists
    every failing ``(arc, error)`` pair.
    """
    out = _collect(amb, ("min", "max"))
    return CostBounds(out["min"], out["max"])
