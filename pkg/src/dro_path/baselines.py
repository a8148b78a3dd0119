"""Comparison methods: budgeted-uncertainty robust paths and a first/second-moment model.

The moment model's bounds are estimated from interval-censored data, where
each observation is known only through which baseline subintervals contain it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ambiguity import ArcAmbiguity, elementary_partition
from .errors import UnresolvableSample
from .graph import DirectedGraph, Path, shortest_path

__all__ = [
    "BudgetParams",
    "MomentEstimates",
    "budgeted_robust_sp",
    "budgeted_path_cost",
    "dr0_costs",
    "dr0_solve",
    "membership_flags",
    "censored_upper_values",
    "concentration_radius",
    "censored_moment_estimates",
]


@dataclass(frozen=True)
class BudgetParams:
    gamma: int

    def __post_init__(self):
        if int(self.gamma) != self.gamma or self.gamma < 0:
            raise ValueError("gamma must be a nonnegative integer")
        object.__setattr__(self, "gamma", int(self.gamma))

    def clipped(self, arc_count: int) -> int:
        return min(self.gamma, arc_count)


@dataclass(frozen=True, eq=False)
class MomentEstimates:
    """Upper bounds on each arc's first and second moment, after widening."""

    mu_hat: np.ndarray
    sigma2_hat: np.ndarray
    eps: np.ndarray
    eps_sigma2: np.ndarray | None = None

    def __post_init__(self):
        for name in ("mu_hat", "sigma2_hat", "eps"):
            arr = np.asarray(getattr(self, name), dtype=float).copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if not self.mu_hat.shape == self.sigma2_hat.shape == self.eps.shape:
            raise ValueError("estimate vectors must have equal length")
        if np.any(self.sigma2_hat < 0):
            raise ValueError("second moments must be nonnegative")

    def truncated(self, upper) -> "MomentEstimates":
        u = np.asarray(upper, dtype=float)
        return MomentEstimates(np.minimum(self.mu_hat, u), np.minimum(self.sigma2_hat, u * u),
                               self.eps, self.eps_sigma2)


def budgeted_path_cost(path: Path, lower, upper, gamma: int) -> float:
    """Cost of ``path`` when at most ``gamma`` of its arcs rise to their upper bound."""
    lo = np.asarray(lower, dtype=float)
    dev = sorted((float(upper[a] - lo[a]) for a in path), reverse=True)
    return math.fsum([lo[a] for a in path] + dev[:gamma])


def budgeted_robust_sp(graph: DirectedGraph, lower, upper, gamma: int, source: int = 0,
                       sink: int | None = None) -> tuple[Path, float]:
    """Path minimising its cost when an adversary raises up to ``gamma`` arcs to ``upper``.

    Solves one shortest path per distinct deviation threshold ``theta`` (the
    deviations and zero) with arc costs ``lower + max(d - theta, 0)`` and
    keeps the best ``gamma * theta + distance``. Ties favour the smaller
    arc-id sequence.
    """
    lo = np.asarray(lower, dtype=float)
    hi = np.asarray(upper, dtype=float)
    if lo.shape != (graph.arc_count,) or hi.shape != lo.shape:
        raise ValueError("need one lower and one upper cost per arc")
    if np.any(hi < lo):
        raise ValueError("lower costs must not exceed upper costs")
    gamma = BudgetParams(gamma).clipped(graph.arc_count)
    if sink is None:
        sink = graph.node_count - 1
    dev = hi - lo
    thresholds = np.unique(np.concatenate([dev, [0.0]]))[::-1]
    best: tuple[float, Path] | None = None
    for theta in thresholds:
        costs = lo + np.maximum(dev - theta, 0.0)
        path, dist = shortest_path(graph, costs, source, sink)
        value = budgeted_path_cost(path, lo, hi, gamma)
        tol = 1e-9 * max(1.0, abs(value))
        if best is None or value < best[0] - tol or (value <= best[0] + tol and path < best[1]):
            best = (value, path)
    return best[1], best[0]


def dr0_costs(support_upper, estimates: MomentEstimates, support_lower=None) -> np.ndarray:
    """Per-arc worst-case expected cost ``min(mu_hat, sqrt(sigma2_hat))`` within the support."""
    u = np.asarray(support_upper, dtype=float)
    est = estimates.truncated(u)
    costs = np.minimum(est.mu_hat, np.sqrt(est.sigma2_hat))
    if support_lower is not None:
        costs = np.maximum(costs, np.asarray(support_lower, dtype=float))
    return np.minimum(costs, u)


def dr0_solve(graph: DirectedGraph, support: tuple[Sequence[float], Sequence[float]],
              estimates: MomentEstimates, source: int = 0, sink: int | None = None
              ) -> tuple[Path, float, np.ndarray]:
    """Shortest path under the moment model's per-arc worst-case expected costs.

    ``support`` is ``(lower, upper)``.
    """
    lower, upper = support
    costs = dr0_costs(upper, estimates, lower)
    if sink is None:
        sink = graph.node_count - 1
    path, value = shortest_path(graph, costs, source, sink)
    costs.flags.writeable = False
    return path, value, costs


def membership_flags(values, ambiguity: ArcAmbiguity) -> np.ndarray:
    """Which constraint intervals (support first) contain each value; shape ``(n, D)``."""
    x = np.asarray(values, dtype=float)[:, None]
    lo, hi = ambiguity.endpoints()
    return (x >= lo[None, :]) & (x <= hi[None, :])


def _upper_value(flags: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> float:
    u_star = float(np.min(hi[flags]))
    cand = ~flags & (lo <= u_star) & (u_star <= hi)
    return float(np.min(lo[cand])) if cand.any() else u_star


def censored_upper_values(flags, ambiguity: ArcAmbiguity) -> np.ndarray:
    """Largest cost value consistent with each row of membership flags.

    The value is the right end of the tightest containing interval, unless
    an interval the sample is known to miss starts at or before that point
    while still covering it; then the smallest such left endpoint is used.

    Raises
    ------
    UnresolvableSample
        For flag patterns no cost value produces.
    """
    flags = np.asarray(flags, dtype=bool)
    lo, hi = ambiguity.endpoints()
    if flags.ndim != 2 or flags.shape[1] != lo.size:
        raise ValueError("flags must have one column per constraint interval")
    part = elementary_partition(ambiguity)
    signatures = {tuple(col) for col in part.membership().T}
    out = np.empty(flags.shape[0])
    cache: dict[tuple, float] = {}
    for k, row in enumerate(flags):
        key = tuple(bool(v) for v in row)
        if key not in cache:
            if key not in signatures:
                raise UnresolvableSample(f"membership pattern {key} matches no region")
            cache[key] = _upper_value(row, lo, hi)
        out[k] = cache[key]
    return out


def concentration_radius(region_values, r: int, eta0: float, arc_count: int,
                         *, rtol: float = 1e-12) -> float:
    """``eps`` with ``2 |A| sum_j exp(-2 r (eps / (W Xi_j))^2) = eta0``, found by bisection.

    ``region_values`` holds one maximal value ``Xi_j`` per elementary region;
    ``W`` is their count.
    """
    xi = np.asarray(region_values, dtype=float)
    W = xi.size
    if r < 1 or W == 0:
        raise ValueError("need samples and at least one region")
    if not 0.0 < eta0 < 1.0:
        raise ValueError("eta0 must lie in (0, 1)")
    scale = W * xi[xi > 0]
    if scale.size == 0:
        return 0.0

    def total(eps: float) -> float:
        return 2.0 * arc_count * math.fsum(np.exp(-2.0 * r * (eps / scale) ** 2))

    if total(0.0) <= eta0:
        return 0.0
    lo_e, hi_e = 0.0, float(scale.max())
    while total(hi_e) > eta0:
        lo_e, hi_e = hi_e, 2.0 * hi_e
    for _ in range(400):
        mid = 0.5 * (lo_e + hi_e)
        if total(mid) > eta0:
            lo_e = mid
        else:
            hi_e = mid
        if hi_e - lo_e <= rtol * hi_e:
            break
    return hi_e


def censored_moment_estimates(flags: Sequence[np.ndarray], ambiguities: Sequence[ArcAmbiguity],
                              eta0: float, arc_count: int | None = None) -> MomentEstimates:
    """First and second moment upper bounds from interval-censored samples.

    Parameters
    ----------
    flags : sequence of ndarray
        Per arc, an ``(r, D_a)`` boolean matrix from :func:`membership_flags`.
    ambiguities : sequence of ArcAmbiguity
        The intervals the flags refer to.
    eta0 : float
        Violation probability shared by all ``2 |A|`` moment statements.
    arc_count : int, optional
        Defaults to ``len(ambiguities)``.

    Returns
    -------
    MomentEstimates
        Widened means and second moments, truncated to ``u`` and ``u**2``.
    """
    if len(flags) != len(ambiguities):
        raise ValueError("need one flag matrix per arc")
    n_arcs = len(ambiguities) if arc_count is None else int(arc_count)
    mu, s2, eps_mu, eps_s2, upper = [], [], [], [], []
    for f, amb in zip(flags, ambiguities):
        f = np.asarray(f, dtype=bool)
        r = f.shape[0]
        xi_bar = censored_upper_values(f, amb)
        part = elementary_partition(amb)
        lo, hi = amb.endpoints()
        region_xi = np.array([_upper_value(sig, lo, hi) for sig in part.membership().T])
        e1 = concentration_radius(region_xi, r, eta0, n_arcs)
        e2 = concentration_radius(region_xi ** 2, r, eta0, n_arcs)
        mu.append(math.fsum(xi_bar) / r + e1)
        s2.append(math.fsum(xi_bar ** 2) / r + e2)
        eps_mu.append(e1)
        eps_s2.append(e2)
        upper.append(amb.upper)
    u = np.array(upper)
    return MomentEstimates(np.minimum(mu, u), np.minimum(s2, u * u), np.array(eps_mu), np.array(eps_s2))
