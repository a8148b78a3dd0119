"""Exact solvers for the distributionally robust shortest path problem.

Three routes are offered: a single shortest path under per-arc worst-case
costs when no expectation rows are present, an exact mixed-integer model
solved by best-bound branch-and-bound, and brute-force path enumeration used
as a reference.

Ties between equally good paths go to the lexicographically smallest arc-id
sequence in every route.
"""
from __future__ import annotations

import heapq
import itertools
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .ambiguity import AmbiguitySet
from .errors import AmbiguityInfeasible, NodeLimit, NoPath, NumericalFailure, RequiresMip
from .graph import DirectedGraph, Path, enumerate_paths, flow_system, path_from_incidence, shortest_path
from .lp import LinearProgram, LpSolution, solve_lp
from .moment import CostBounds, bounds_all, worst_case_costs

__all__ = [
    "DrsppInstance",
    "SolverStats",
    "DrsppSolution",
    "MixedIntegerProgram",
    "solve_no_expectation",
    "worst_case_scenario",
    "check_nonempty",
    "build_mip",
    "solve_mip",
    "oracle_solve",
    "solve",
]

log = logging.getLogger(__name__)

INT_TOL = 1e-6
GAP_TOL = 1e-6
_TIE_RTOL = 1e-9


def _tie_tol(value: float) -> float:
    return _TIE_RTOL * max(1.0, abs(value))


@dataclass(frozen=True)
class DrsppInstance:
    graph: DirectedGraph
    source: int
    sink: int
    ambiguity: AmbiguitySet

    def __post_init__(self):
        if self.ambiguity.arc_count != self.graph.arc_count:
            raise ValueError("ambiguity must cover every arc exactly once")
        n = self.graph.node_count
        if not (0 <= self.source < n and 0 <= self.sink < n) or self.source == self.sink:
            raise ValueError("source and sink must be distinct nodes of the graph")
        seen, stack = {self.source}, [self.source]
        while stack:
            u = stack.pop()
            for a in self.graph.out_arcs[u]:
                v = self.graph.heads[a]
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        if self.sink not in seen:
            raise NoPath(f"node {self.sink} is unreachable from {self.source}")

    @property
    def has_expectations(self) -> bool:
        return bool(self.ambiguity.expectation_rows)

    def to_dict(self) -> dict:
        return {"graph": self.graph.to_dict(self.source, self.sink),
                "ambiguity": self.ambiguity.to_dict()}

    @classmethod
    def from_dict(cls, d) -> "DrsppInstance":
        g, s, t = DirectedGraph.from_dict(d["graph"])
        return cls(g, s, t, AmbiguitySet.from_dict(d["ambiguity"]))


@dataclass
class SolverStats:
    nodes_explored: int = 0
    lp_solves: int = 0
    wall_time: float = 0.0


@dataclass(frozen=True)
class DrsppSolution:
    path: Path
    objective: float
    worst_case_costs: np.ndarray = field(repr=False)
    solver_stats: SolverStats = field(default_factory=SolverStats)

    def to_dict(self) -> dict:
        return {"path": list(self.path.arc_ids), "objective": self.objective,
                "stats": {"nodes_explored": self.solver_stats.nodes_explored,
                          "lp_solves": self.solver_stats.lp_solves,
                          "wall_time": self.solver_stats.wall_time}}


def solve_no_expectation(inst: DrsppInstance) -> DrsppSolution:
    """Shortest path under per-arc worst-case expected costs.

    Raises
    ------
    RequiresMip
        If the ambiguity set has expectation rows.
    """
    if inst.has_expectations:
        raise RequiresMip("expectation rows couple arcs; use solve_mip")
    t0 = time.perf_counter()
    c_max = worst_case_costs(inst.ambiguity)
    path, value = shortest_path(inst.graph, c_max, inst.source, inst.sink)
    c_max.flags.writeable = False
    stats = SolverStats(0, 2 * inst.graph.arc_count, time.perf_counter() - t0)
    return DrsppSolution(path, value, c_max, stats)


def _scenario_lp(inst: DrsppInstance, bounds: CostBounds, weights: np.ndarray):
    amb = inst.ambiguity
    coupled = np.asarray(amb.coupled_arcs, dtype=np.int64)
    B = amb.B[:, coupled]
    lp = LinearProgram(weights[coupled], B, ("<=",) * B.shape[0], amb.b,
                       bounds.c_min[coupled], bounds.c_max[coupled], sense="max")
    return coupled, solve_lp(lp)


def check_nonempty(inst: DrsppInstance, bounds: CostBounds) -> None:
    """Raise :class:`AmbiguityInfeasible` unless some expected-cost vector meets every row."""
    if not inst.has_expectations:
        return
    _, sol = _scenario_lp(inst, bounds, np.zeros(inst.graph.arc_count))
    if not sol.optimal:
        raise AmbiguityInfeasible("expectation rows contradict the per-arc cost bounds")


def worst_case_scenario(inst: DrsppInstance, bounds: CostBounds, path: Path
                        ) -> tuple[np.ndarray, float]:
    """Expected-cost vector in the admissible polytope that maximises the path's cost.

    Arcs outside every expectation row sit at their worst-case cost.

    Returns
    -------
    costs : ndarray
    value : float
        The path's worst-case expected cost.
    """
    cbar = np.array(bounds.c_max, dtype=float)
    if inst.has_expectations:
        coupled, sol = _scenario_lp(inst, bounds, path.incidence.astype(float))
        if not sol.optimal:
            raise AmbiguityInfeasible("expectation rows contradict the per-arc cost bounds")
        cbar[coupled] = np.clip(sol.x, bounds.c_min[coupled], bounds.c_max[coupled])
    return cbar, path.cost(cbar)


@dataclass(frozen=True, eq=False)
class MixedIntegerProgram:
    """A linear program plus a mask of variables that must be 0 or 1.

    ``layout`` maps block names (``y``, ``lambda``, ``mu``, ``nu``) to column
    slices; ``dual_arcs`` lists the arcs that own a ``mu``/``nu`` pair.
    """

    lp: LinearProgram
    integer: np.ndarray
    layout: dict
    dual_arcs: tuple[int, ...]


def build_mip(inst: DrsppInstance, bounds: CostBounds, *, reduce: bool = False) -> MixedIntegerProgram:
    """Single-level model that minimises the dualised inner worst case over paths.

    Columns are ``y`` (one per arc), ``lambda`` (one per expectation row) and
    ``mu``, ``nu`` (one each per arc). Rows are ``-y + B'lambda + nu - mu = 0``
    per arc followed by flow conservation per node. The objective is
    ``b'lambda + c_max'nu - c_min'mu``.

    With ``reduce=True`` arcs that appear in no expectation row lose their
    ``mu``/``nu`` pair and coupling row; their worst-case cost moves onto ``y``.
    """
    g = inst.graph
    n_arcs = g.arc_count
    amb = inst.ambiguity
    B = amb.B
    d0 = B.shape[0]
    dual_arcs = np.asarray(amb.coupled_arcs if reduce else range(n_arcs), dtype=np.int64)
    k = dual_arcs.size
    n_vars = n_arcs + d0 + 2 * k
    ys = slice(0, n_arcs)
    ls = slice(n_arcs, n_arcs + d0)
    ms = slice(n_arcs + d0, n_arcs + d0 + k)
    ns = slice(n_arcs + d0 + k, n_vars)

    c = np.zeros(n_vars)
    c[ls] = amb.b
    c[ms] = -bounds.c_min[dual_arcs]
    c[ns] = bounds.c_max[dual_arcs]
    if reduce:
        free = np.ones(n_arcs, dtype=bool)
        free[dual_arcs] = False
        c[:n_arcs] = np.where(free, bounds.c_max, 0.0)

    flow = flow_system(g, inst.source, inst.sink)
    A = np.zeros((k + g.node_count, n_vars))
    rows_k = np.arange(k)
    A[rows_k, dual_arcs] = -1.0
    A[:k, ls] = B[:, dual_arcs].T
    A[rows_k, n_arcs + d0 + rows_k] = -1.0
    A[rows_k, n_arcs + d0 + k + rows_k] = 1.0
    A[k:, ys] = flow.node_arc_matrix
    rhs = np.concatenate([np.zeros(k), flow.rhs])
    lower = np.zeros(n_vars)
    upper = np.full(n_vars, np.inf)
    upper[ys] = 1.0
    lp = LinearProgram(c, A, ("=",) * (k + g.node_count), rhs, lower, upper, "min")
    integer = np.zeros(n_vars, dtype=bool)
    integer[ys] = True
    layout = {"y": ys, "lambda": ls, "mu": ms, "nu": ns}
    return MixedIntegerProgram(lp, integer, layout, tuple(int(a) for a in dual_arcs))


class _Search:
    """Best-bound branch-and-bound over the arc variables of a built model."""

    def __init__(self, inst, bounds, mip, stats, node_limit, int_tol):
        self.inst = inst
        self.bounds = bounds
        self.mip = mip
        self.stats = stats
        self.node_limit = node_limit
        self.int_tol = int_tol
        self.n_arcs = inst.graph.arc_count
        self.root_basis = None

    def relax(self, fixed: dict[int, int], warm=None) -> LpSolution:
        lo = self.mip.lp.lower.copy()
        hi = self.mip.lp.upper.copy()
        for a, v in fixed.items():
            lo[a] = hi[a] = float(v)
        self.stats.lp_solves += 1
        return solve_lp(self.mip.lp.with_bounds(lo, hi), warm_start=warm)

    def certify(self, y: np.ndarray) -> tuple[float, Path, np.ndarray]:
        path = path_from_incidence(self.inst.graph, y, self.inst.source, self.inst.sink,
                                   tol=self.int_tol)
        self.stats.lp_solves += 1
        cbar, value = worst_case_scenario(self.inst, self.bounds, path)
        return value, path, cbar

    def run(self, fixed: dict[int, int], incumbent=None, cutoff: float = math.inf):
        """Best integral solution under ``fixed`` that beats ``incumbent`` and ``cutoff``.

        With a finite ``cutoff`` the search stops at the first solution whose
        value does not exceed it.
        """
        counter = itertools.count()
        heap = [(-math.inf, next(counter), tuple(sorted(fixed.items())), self.root_basis)]
        best = incumbent
        while heap:
            parent_bound, _, fix, warm = heapq.heappop(heap)
            limit = min(cutoff, best[0] - _tie_tol(best[0]) if best else math.inf)
            if parent_bound > limit:
                continue
            if self.stats.nodes_explored >= self.node_limit:
                raise NodeLimit(f"node limit {self.node_limit} reached", incumbent=best)
            self.stats.nodes_explored += 1
            sol = self.relax(dict(fix), warm)
            if self.root_basis is None and sol.basis is not None:
                self.root_basis = sol.basis
            if sol.status == "infeasible":
                continue
            if not sol.optimal:
                raise NumericalFailure(f"relaxation ended with status {sol.status}")
            bound = sol.objective_value
            if bound > limit:
                continue
            y = sol.x[: self.n_arcs]
            frac = np.minimum(y, 1.0 - y)
            j = int(np.argmax(frac))
            if frac[j] <= self.int_tol:
                value, path, cbar = self.certify(y)
                if best is None or value < best[0] - _tie_tol(value) or (
                        value <= best[0] + _tie_tol(value) and path < best[1]):
                    best = (value, path, cbar)
                    log.debug("incumbent %.9g after %d nodes", value, self.stats.nodes_explored)
                if math.isfinite(cutoff) and best[0] <= cutoff:
                    return best
                continue
            for v in (0, 1):
                heapq.heappush(heap, (bound, next(counter), tuple(sorted(fix + ((j, v),))), sol.basis))
        return best


def _lexicographic_refine(search: _Search, best):
    """Replace ``best`` by the lexicographically smallest path of equal value."""
    g = search.inst.graph
    value = best[0]
    cutoff = value + _tie_tol(value)
    pos = 0
    prefix: list[int] = []
    while True:
        path = best[1]
        if pos >= len(path):
            return best
        current = path.arc_ids[pos]
        u = g.tails[current]
        for a in sorted(g.out_arcs[u]):
            if a >= current:
                break
            fixed = {b: 1 for b in prefix}
            fixed[a] = 1
            found = search.run(fixed, None, cutoff=cutoff)
            if found is not None and found[0] <= cutoff and found[1] < path:
                best = found
                break
        prefix.append(best[1].arc_ids[pos])
        pos += 1


def solve_mip(inst: DrsppInstance, bounds: CostBounds | None = None, *,
              node_limit: int = 1_000_000, int_tol: float = INT_TOL,
              reduce: bool = True, lexicographic: bool = True) -> DrsppSolution:
    """Globally optimal path by branch-and-bound on the single-level model.

    Parameters
    ----------
    inst : DrsppInstance
    bounds : CostBounds, optional
        Precomputed per-arc cost bounds; computed (and validated) when omitted.
    node_limit : int
    int_tol : float
        Integrality tolerance on the arc variables.
    reduce : bool
        Drop dual variables of arcs outside every expectation row.
    lexicographic : bool
        Resolve ties between optimal paths towards the smallest arc-id sequence.

    Raises
    ------
    AmbiguityInfeasible
        When the expectation rows admit no expected-cost vector.
    NodeLimit
        When the node budget runs out; carries the incumbent.
    """
    t0 = time.perf_counter()
    if bounds is None:
        bounds = bounds_all(inst.ambiguity)
    stats = SolverStats()
    check_nonempty(inst, bounds)
    stats.lp_solves += int(inst.has_expectations)
    mip = build_mip(inst, bounds, reduce=reduce)
    search = _Search(inst, bounds, mip, stats, node_limit, int_tol)

    start, _ = shortest_path(inst.graph, bounds.c_max, inst.source, inst.sink)
    cbar, value = worst_case_scenario(inst, bounds, start)
    stats.lp_solves += int(inst.has_expectations)
    best = search.run({}, (value, start, cbar))
    if lexicographic:
        best = _lexicographic_refine(search, best)
    value, path, cbar = best
    cbar.flags.writeable = False
    stats.wall_time = time.perf_counter() - t0
    log.info("branch-and-bound: %d nodes, %d LPs, %.3fs", stats.nodes_explored,
             stats.lp_solves, stats.wall_time)
    return DrsppSolution(path, value, cbar, stats)


def oracle_solve(inst: DrsppInstance, bounds: CostBounds | None = None, *,
                 cap: int = 10_000) -> DrsppSolution:
    """Minimum over every simple path of its worst-case expected cost.

    Raises
    ------
    CapExceeded
        If the graph has more than ``cap`` simple paths.
    """
    t0 = time.perf_counter()
    paths = enumerate_paths(inst.graph, inst.source, inst.sink, cap=cap)
    if bounds is None:
        bounds = bounds_all(inst.ambiguity)
    check_nonempty(inst, bounds)
    best = None
    for p in paths:
        cbar, value = worst_case_scenario(inst, bounds, p)
        if best is None or value < best[0] - _tie_tol(value):
            best = (value, p, cbar)
    stats = SolverStats(0, len(paths), time.perf_counter() - t0)
    best[2].flags.writeable = False
    return DrsppSolution(best[1], best[0], best[2], stats)


def solve(inst: DrsppInstance, method: str = "auto", **kwargs) -> DrsppSolution:
    """Dispatch on ``method``: ``auto``, ``poly``, ``mip`` or ``oracle``."""
    if method == "auto":
        method = "mip" if inst.has_expectations else "poly"
    if method == "poly":
        return solve_no_expectation(inst)
    if method == "mip":
        return solve_mip(inst, **kwargs)
    if method == "oracle":
        return oracle_solve(inst, **kwargs)
    raise ValueError(f"unknown method {method!r}")
