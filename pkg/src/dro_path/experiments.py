"""Experiment harness: per-instance method comparison, parameter sweeps and timing runs."""
from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from typing import Callable, Iterable, Sequence

import numpy as np

from .ambiguity import AmbiguitySet
from .baselines import budgeted_robust_sp, censored_moment_estimates, dr0_solve, membership_flags
from .datagen import (AmbiguityInfo, ExperimentConfig, NominalModel, build_ambiguity,
                      example1_ambiguity, example1_graph, example1_nominal, gen_layered,
                      gen_nominal, layered_terminals, relative_expected_loss, sample_costs)
from .errors import DroPathError
from .graph import DirectedGraph, enumerate_paths
from .moment import bounds_all
from .solver import DrsppInstance, solve_mip, solve_no_expectation

__all__ = [
    "METHOD_F1",
    "METHOD_F1_PRIME",
    "METHOD_DR0",
    "RESULT_HEADER",
    "TIMING_HEADER",
    "TIME_COLUMNS",
    "GeneratedInstance",
    "ResultRow",
    "TimingRow",
    "generate_instance",
    "run_instance",
    "all_methods",
    "budget_tag",
    "run_comparison",
    "summarize",
    "run_sweep",
    "run_timing",
    "example1_table",
    "write_csv",
    "format_value",
    "result_records",
]

METHOD_F1 = "F1"
METHOD_F1_PRIME = "F1'"
METHOD_DR0 = "DR0"

SWEEPABLE = ("kappa", "n1", "gamma", "v", "n0", "eta0")


def budget_tag(gamma: int) -> str:
    return f"R0:{gamma}"


def format_value(x) -> str:
    """Locale-independent CSV cell: ``.12g`` for floats, empty for missing values."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "" if math.isnan(x) else format(float(x), ".12g")
    return str(x)


@dataclass(frozen=True, eq=False)
class GeneratedInstance:
    seed: int
    graph: DirectedGraph
    source: int
    sink: int
    model: NominalModel
    samples: np.ndarray
    ambiguity: AmbiguitySet
    info: AmbiguityInfo
    build_time: float

    @property
    def drspp(self) -> DrsppInstance:
        return DrsppInstance(self.graph, self.source, self.sink, self.ambiguity)


@dataclass(frozen=True)
class ResultRow:
    method: str
    seed: int
    rho: float
    objective: float
    wall_time_s: float
    bounds_time_s: float = math.nan
    mip_time_s: float = math.nan
    path: str = ""
    error: str = ""

    @classmethod
    def failed(cls, method: str, seed: int, exc: BaseException) -> "ResultRow":
        return cls(method, seed, math.nan, math.nan, math.nan,
                   error=f"{type(exc).__name__}: {exc}")


@dataclass(frozen=True)
class TimingRow:
    v: int
    r: int
    seed: int
    arcs: int
    bounds_time_s: float
    mip_time_s: float
    nodes: int
    lp_solves: int
    objective: float
    error: str = ""


def generate_instance(cfg: ExperimentConfig, seed: int) -> GeneratedInstance:
    """Graph, nominal model, samples and ambiguity set for one seed."""
    t0 = time.perf_counter()
    cfg = cfg.with_(seed=seed)
    graph = gen_layered(cfg.v, cfg.r)
    s, t = layered_terminals(graph)
    model = gen_nominal(graph, seed, cfg.sigma_tilde)
    samples = sample_costs(model, cfg.n0, seed)
    amb, info = build_ambiguity(graph, model, samples, cfg, s, t, return_info=True)
    return GeneratedInstance(seed, graph, s, t, model, samples, amb, info, time.perf_counter() - t0)


def _path_label(path) -> str:
    return " ".join(str(a) for a in path.arc_ids)


def all_methods(cfg: ExperimentConfig) -> tuple[str, ...]:
    return (METHOD_F1, METHOD_F1_PRIME, METHOD_DR0) + tuple(budget_tag(g) for g in cfg.gamma_list)


def _run_f1(gi: GeneratedInstance, cfg: ExperimentConfig, score) -> list[ResultRow]:
    t0 = time.perf_counter()
    bounds = bounds_all(gi.ambiguity)
    t1 = time.perf_counter()
    sol = solve_mip(gi.drspp, bounds)
    t2 = time.perf_counter()
    return [ResultRow(METHOD_F1, gi.seed, score(sol.path), sol.objective, t2 - t0,
                      t1 - t0, t2 - t1, _path_label(sol.path))]


def _run_f1_prime(gi: GeneratedInstance, cfg: ExperimentConfig, score) -> list[ResultRow]:
    inst = DrsppInstance(gi.graph, gi.source, gi.sink, gi.ambiguity.without_expectations())
    sol = solve_no_expectation(inst)
    wall = sol.solver_stats.wall_time
    return [ResultRow(METHOD_F1_PRIME, gi.seed, score(sol.path), sol.objective, wall,
                      wall, 0.0, _path_label(sol.path))]


def _run_dr0(gi: GeneratedInstance, cfg: ExperimentConfig, score) -> list[ResultRow]:
    t0 = time.perf_counter()
    amb = gi.ambiguity
    flags = [membership_flags(gi.samples[:, a], amb.per_arc[a]) for a in range(gi.graph.arc_count)]
    est = censored_moment_estimates(flags, amb.per_arc, cfg.eta0, gi.graph.arc_count)
    path, value, _ = dr0_solve(gi.graph, (gi.model.lower, gi.model.upper), est, gi.source, gi.sink)
    return [ResultRow(METHOD_DR0, gi.seed, score(path), value, time.perf_counter() - t0,
                      path=_path_label(path))]


def _budget_runner(gamma: int):
    def run(gi: GeneratedInstance, cfg: ExperimentConfig, score) -> list[ResultRow]:
        t0 = time.perf_counter()
        path, value = budgeted_robust_sp(gi.graph, gi.model.lower, gi.model.upper, gamma,
                                         gi.source, gi.sink)
        return [ResultRow(budget_tag(gamma), gi.seed, score(path), value,
                          time.perf_counter() - t0, path=_path_label(path))]
    return run


def all_methods(cfg: ExperimentConfig) -> tuple[str, ...]:
    return (METHOD_F1, METHOD_F1_PRIME, METHOD_DR0) + tuple(budget_tag(g) for g in cfg.gamma_list)


def run_instance(cfg: ExperimentConfig, seed: int,
                 methods: Sequence[str] | None = None) -> list[ResultRow]:
    """Selected methods (default: all) on one generated instance.

    Failures become rows with an error tag.
    """
    runners = {METHOD_F1: _run_f1, METHOD_F1_PRIME: _run_f1_prime, METHOD_DR0: _run_dr0}
    runners.update({budget_tag(g): _budget_runner(g) for g in cfg.gamma_list})
    wanted = [m for m in all_methods(cfg) if methods is None or m in methods]
    try:
        gi = generate_instance(cfg, seed)
    except DroPathError as exc:
        return [ResultRow.failed(m, seed, exc) for m in wanted]

    def score(path):
        return relative_expected_loss(path, gi.model, gi.graph, gi.source, gi.sink)

    rows = []
    for method in wanted:
        try:
            rows.extend(runners[method](gi, cfg, score))
        except DroPathError as exc:
            rows.append(ResultRow.failed(method, seed, exc))
    return rows


def _map(fn: Callable, args: Sequence, workers: int):
    if workers <= 1 or len(args) <= 1:
        return [fn(*a) for a in args]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*args)))


def _seeds(cfg: ExperimentConfig, instances: int) -> list[int]:
    if instances < 1:
        raise ValueError("instances must be at least 1")
    return [cfg.seed + k for k in range(instances)]


def run_comparison(cfg: ExperimentConfig, instances: int, workers: int = 1,
                   methods: Sequence[str] | None = None) -> tuple[list[ResultRow], list[dict]]:
    """Methods on ``instances`` consecutive seeds starting at ``cfg.seed``.

    Returns the per-(seed, method) rows, ordered by seed, and the per-method summary.
    """
    args = [(cfg, s, methods) for s in _seeds(cfg, instances)]
    per_seed = _map(run_instance, args, workers)
    rows = [row for chunk in per_seed for row in chunk]
    return rows, summarize(rows)


def summarize(rows: Iterable[ResultRow]) -> list[dict]:
    """Mean and sample standard deviation of the relative loss per method."""
    by_method: dict[str, list[ResultRow]] = {}
    for row in rows:
        by_method.setdefault(row.method, []).append(row)
    out = []
    for method, items in by_method.items():
        ok = np.array([r.rho for r in items if not r.error], dtype=float)
        out.append({"method": method, "instances": len(items), "failures": len(items) - ok.size,
                    "mean_rho": float(ok.mean()) if ok.size else math.nan,
                    "std_rho": float(ok.std(ddof=1)) if ok.size > 1 else math.nan})
    return out


def run_sweep(cfg: ExperimentConfig, param: str, values: Sequence, instances: int,
              workers: int = 1, methods: Sequence[str] | None = None
              ) -> list[tuple[str, object, ResultRow]]:
    """:func:`run_comparison` at each value of one configuration parameter.

    ``gamma`` sweeps replace the budget list by the single value.
    """
    if param not in SWEEPABLE:
        raise ValueError(f"cannot sweep {param!r}; choose from {SWEEPABLE}")
    out = []
    for value in values:
        if param == "gamma":
            point = cfg.with_(gamma_list=(int(value),))
        else:
            cast = int if param in ("n1", "v", "n0") else float
            point = cfg.with_(**{param: cast(value)})
        rows, _ = run_comparison(point, instances, workers, methods)
        out.extend((param, value, row) for row in rows)
    return out


def _time_one(cfg: ExperimentConfig, seed: int) -> TimingRow:
    try:
        gi = generate_instance(cfg, seed)
        t0 = time.perf_counter()
        bounds = bounds_all(gi.ambiguity)
        t1 = time.perf_counter()
        sol = solve_mip(gi.drspp, bounds)
        t2 = time.perf_counter()
        st = sol.solver_stats
        return TimingRow(cfg.v, cfg.r, seed, gi.graph.arc_count, t1 - t0, t2 - t1,
                         st.nodes_explored, st.lp_solves, sol.objective)
    except DroPathError as exc:
        return TimingRow(cfg.v, cfg.r, seed, 0, math.nan, math.nan, 0, 0, math.nan,
                         f"{type(exc).__name__}: {exc}")


def run_timing(v_list: Sequence[int], r: int, cfg: ExperimentConfig, instances: int,
               workers: int = 1) -> list[TimingRow]:
    """Stage times (cost bounds, then branch-and-bound) per layer count and seed."""
    out = []
    for v in v_list:
        point = cfg.with_(v=int(v), r=int(r))
        out.extend(_map(_time_one, [(point, s) for s in _seeds(point, instances)], workers))
    return out


def example1_table() -> dict:
    """Path costs of the four-node example under the three cost views.

    Returns a dict with ``rows`` (one per simple path: label, interval-robust
    cost, distributionally robust cost, nominal expected cost), the
    worst-case cost vector and the optimal paths of the two robust views.
    """
    g, s, t = example1_graph()
    amb = example1_ambiguity()
    model = example1_nominal()
    bounds = bounds_all(amb)
    mean = model.mean
    rows = []
    for p in enumerate_paths(g, s, t):
        label = "-".join(str(v + 1) for v in p.nodes(g))
        rows.append({"path": label, "naive_robust": p.cost(amb.upper),
                     "distributionally_robust": p.cost(bounds.c_max), "nominal": p.cost(mean),
                     "rho": relative_expected_loss(p, model, g, s, t)})
    order = {"1-2-4": 0, "1-3-4": 1, "1-2-3-4": 2}
    rows.sort(key=lambda r: order.get(r["path"], len(order)))
    dr = solve_no_expectation(DrsppInstance(g, s, t, amb))
    naive = solve_no_expectation(DrsppInstance(g, s, t, AmbiguitySet(
        tuple(type(a).build(a.lower, a.upper) for a in amb.per_arc))))
    return {"rows": rows, "c_max": bounds.c_max.tolist(),
            "dr_path": "-".join(str(v + 1) for v in dr.path.nodes(g)), "dr_objective": dr.objective,
            "naive_path": "-".join(str(v + 1) for v in naive.path.nodes(g)),
            "naive_objective": naive.objective}


def write_csv(header: Sequence[str], records: Iterable[Sequence], out=None,
              omit: Sequence[str] = ()) -> str:
    """Write records under ``header``; columns named in ``omit`` are left empty."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    blank = {header.index(c) for c in omit if c in header}
    for rec in records:
        w.writerow(["" if i in blank else format_value(x) for i, x in enumerate(rec)])
    text = buf.getvalue()
    if out is not None:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    return text


RESULT_HEADER = tuple(f.name for f in fields(ResultRow))
TIMING_HEADER = tuple(f.name for f in fields(TimingRow))
TIME_COLUMNS = ("wall_time_s", "bounds_time_s", "mip_time_s")


def result_records(rows: Iterable[ResultRow]):
    return [tuple(getattr(r, h) for h in RESULT_HEADER) for r in rows]
