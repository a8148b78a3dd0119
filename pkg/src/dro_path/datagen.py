"""Random benchmark instances: layered graphs, beta cost models, sampled ambiguity sets.

Randomness comes from Philox streams keyed by ``(seed, stream, arc)``, so
every arc's draws are independent of how many other arcs exist and of the
order in which arcs are processed.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from .ambiguity import (AmbiguitySet, ArcAmbiguity, QuantileConstraint, bonferroni_eta,
                        expectation_from_samples, quantile_from_samples)
from .graph import DirectedGraph, Path, near_optimal_paths, shortest_path
from .moment import worst_case_costs

__all__ = [
    "NominalModel",
    "ExperimentConfig",
    "arc_rng",
    "gen_layered",
    "layered_terminals",
    "beta_parameters",
    "gen_nominal",
    "sample_costs",
    "draw_subintervals",
    "AmbiguityInfo",
    "build_ambiguity",
    "relative_expected_loss",
    "example1_graph",
    "example1_ambiguity",
    "example1_nominal",
]

STREAM_NOMINAL = 1
STREAM_SAMPLES = 2
STREAM_SUBINTERVALS = 3


def arc_rng(seed: int, stream: int, arc: int) -> np.random.Generator:
    """Independent generator for one arc within one named stream."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream), int(arc)))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True, eq=False)
class NominalModel:
    """Independent per-arc cost distributions ``l + (u - l) * Beta(alpha, beta)``.

    ``mixtures`` optionally replaces an arc's marginal by a finite mixture,
    given as ``{arc: ((weight, lo, hi, alpha, beta), ...)}``.
    """

    lower: np.ndarray
    upper: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    sigma_tilde: float = 1.0 / 64.0
    mixtures: dict = field(default_factory=dict)

    def __post_init__(self):
        arrays = [np.asarray(getattr(self, k), dtype=float).copy()
                  for k in ("lower", "upper", "alpha", "beta")]
        if len({a.shape for a in arrays}) != 1 or arrays[0].ndim != 1:
            raise ValueError("per-arc arrays must be vectors of equal length")
        lo, hi, a, b = arrays
        if np.any(lo < 0) or np.any(hi < lo):
            raise ValueError("need 0 <= l <= u")
        if np.any(a <= 0) or np.any(b <= 0):
            raise ValueError("beta shapes must be positive")
        for name, arr in zip(("lower", "upper", "alpha", "beta"), arrays):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        mix = {int(k): tuple(tuple(float(x) for x in comp) for comp in v)
               for k, v in dict(self.mixtures).items()}
        for comps in mix.values():
            if abs(sum(c[0] for c in comps) - 1.0) > 1e-12:
                raise ValueError("mixture weights must sum to 1")
        object.__setattr__(self, "mixtures", mix)

    @property
    def arc_count(self) -> int:
        return self.lower.size

    @property
    def m_tilde(self) -> np.ndarray:
        return self.alpha / (self.alpha + self.beta)

    @property
    def mean(self) -> np.ndarray:
        m = self.lower + (self.upper - self.lower) * self.m_tilde
        for arc, comps in self.mixtures.items():
            m[arc] = math.fsum(w * (lo + (hi - lo) * a / (a + b)) for w, lo, hi, a, b in comps)
        return m

    def to_dict(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist(),
                "alpha": self.alpha.tolist(), "beta": self.beta.tolist(),
                "sigma_tilde": self.sigma_tilde,
                "mixtures": {str(k): [list(c) for c in v] for k, v in self.mixtures.items()}}

    @classmethod
    def from_dict(cls, d) -> "NominalModel":
        mix = {int(k): v for k, v in d.get("mixtures", {}).items()}
        return cls(d["lower"], d["upper"], d["alpha"], d["beta"],
                   d.get("sigma_tilde", 1.0 / 64.0), mix)


@dataclass(frozen=True)
class ExperimentConfig:
    v: int = 20
    r: int = 10
    n0: int = 100
    n1: int = 4
    kappa: float = 0.6
    eta0: float = 0.05
    gamma_list: tuple[int, ...] = (0, 7, 14, 21)
    seed: int = 0
    sigma_tilde: float = 1.0 / 64.0
    use_expectation: bool = True

    def __post_init__(self):
        object.__setattr__(self, "gamma_list", tuple(int(g) for g in self.gamma_list))
        if self.v < 1 or self.r < 1:
            raise ValueError("v and r must be at least 1")
        if self.n0 < 1:
            raise ValueError("n0 must be at least 1")
        if self.n1 < 0:
            raise ValueError("n1 must be nonnegative")
        if not 0.0 < self.kappa < 1.0:
            raise ValueError("kappa must lie in (0, 1)")
        if not 0.0 < self.eta0 < 1.0:
            raise ValueError("eta0 must lie in (0, 1)")
        if not 0.0 < self.sigma_tilde < 0.25:
            raise ValueError("sigma_tilde must lie in (0, 1/4)")
        if any(g < 0 for g in self.gamma_list):
            raise ValueError("budgets must be nonnegative")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def with_(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["gamma_list"] = list(self.gamma_list)
        return d

    @classmethod
    def from_dict(cls, d) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def gen_layered(v: int, r: int, seed: int | None = None) -> DirectedGraph:
    """Source, ``v`` layers of ``r`` nodes, sink; consecutive layers fully connected.

    Node 0 is the source and the last node the sink. The graph is fixed by
    ``(v, r)``; ``seed`` is accepted for interface symmetry.
    """
    if v < 1 or r < 1:
        raise ValueError("v and r must be at least 1")
    sink = v * r + 1
    arcs = [(0, 1 + j) for j in range(r)]
    for layer in range(v - 1):
        base = 1 + layer * r
        arcs += [(base + i, base + r + j) for i in range(r) for j in range(r)]
    last = 1 + (v - 1) * r
    arcs += [(last + i, sink) for i in range(r)]
    return DirectedGraph.from_arcs(sink + 1, sorted(arcs))


def layered_terminals(graph: DirectedGraph) -> tuple[int, int]:
    return 0, graph.node_count - 1


def beta_parameters(m_tilde, sigma_tilde):
    """Beta shapes with mean ``m_tilde`` and variance ``sigma_tilde``."""
    m = np.asarray(m_tilde, dtype=float)
    alpha = m * m * (1.0 - m) / sigma_tilde - m
    return alpha, alpha * (1.0 / m - 1.0)


def gen_nominal(graph: DirectedGraph, seed: int, sigma_tilde: float = 1.0 / 64.0) -> NominalModel:
    """Random supports and beta shapes for every arc."""
    root = math.sqrt(1.0 - 4.0 * sigma_tilde)
    m_lo, m_hi = 0.5 * (1.0 - root), 0.5 * (1.0 + root)
    n = graph.arc_count
    lower, upper, m = np.empty(n), np.empty(n), np.empty(n)
    for a in range(n):
        rng = arc_rng(seed, STREAM_NOMINAL, a)
        lower[a] = rng.uniform(0.0, 100.0)
        upper[a] = lower[a] + rng.uniform(0.0, 100.0)
        draw = rng.uniform(m_lo, m_hi)
        while draw <= m_lo or draw >= m_hi:
            draw = rng.uniform(m_lo, m_hi)
        m[a] = draw
    alpha, beta = beta_parameters(m, sigma_tilde)
    return NominalModel(lower, upper, alpha, beta, sigma_tilde)


def _sample_arc(model: NominalModel, a: int, n: int, rng: np.random.Generator) -> np.ndarray:
    comps = model.mixtures.get(a)
    if comps is None:
        x = rng.beta(model.alpha[a], model.beta[a], n)
        return model.lower[a] + (model.upper[a] - model.lower[a]) * x
    cum = np.cumsum([c[0] for c in comps])
    which = np.minimum(np.searchsorted(cum, rng.uniform(0.0, 1.0, n), side="right"), len(comps) - 1)
    out = np.empty(n)
    for k, (_, lo, hi, al, be) in enumerate(comps):
        sel = which == k
        out[sel] = lo + (hi - lo) * rng.beta(al, be, int(sel.sum()))
    return out


def sample_costs(model: NominalModel, n: int, seed: int) -> np.ndarray:
    """``n`` independent cost vectors, shape ``(n, arc_count)``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    out = np.empty((n, model.arc_count))
    for a in range(model.arc_count):
        out[:, a] = _sample_arc(model, a, n, arc_rng(seed, STREAM_SAMPLES, a))
    return np.clip(out, model.lower, model.upper)


def draw_subintervals(lower: float, upper: float, n1: int, kappa: float,
                      rng: np.random.Generator) -> list[tuple[float, float]]:
    """``n1`` subintervals of width ``kappa * (upper - lower)`` with uniform left ends."""
    width = kappa * (upper - lower)
    lefts = rng.uniform(lower, upper - width, n1)
    return [(float(x), float(min(x + width, upper))) for x in lefts]


@dataclass(frozen=True, eq=False)
class AmbiguityInfo:
    """By-products of :func:`build_ambiguity`.

    ``statements`` is the number of confidence statements sharing the total
    violation budget; ``c_max`` comes from the quantile part alone.
    """

    eta: float
    statements: int
    near_optimal: tuple[Path, ...]
    c_max: np.ndarray
    rounds: int


def _quantile_part(graph, model, samples, cfg, eta, subintervals):
    per_arc = []
    r = samples.shape[0]
    for a in range(graph.arc_count):
        col = samples[:, a]
        qs = []
        for lo, hi in subintervals[a]:
            hits = int(np.count_nonzero((col >= lo) & (col <= hi)))
            qs.append(quantile_from_samples(hits, r, (lo, hi), eta))
        per_arc.append(ArcAmbiguity.build(model.lower[a], model.upper[a], qs))
    return AmbiguitySet(tuple(per_arc))


def build_ambiguity(graph: DirectedGraph, model: NominalModel, samples: np.ndarray,
                    cfg: ExperimentConfig, source: int | None = None, sink: int | None = None,
                    *, return_info: bool = False):
    """Quantile constraints per arc plus two expectation rows per near-optimal path.

    The near-optimal paths are taken under the worst-case costs of the
    quantile part. Each two-sided interval counts as one confidence
    statement, so the per-statement budget is ``eta0 / (n1 |A| + |paths|)``.
    Since the paths depend on that budget, the budget and the paths are
    recomputed until the path count stops changing.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[1] != graph.arc_count:
        raise ValueError("samples must have shape (n0, arc_count)")
    if source is None or sink is None:
        source, sink = layered_terminals(graph)
    subintervals = [draw_subintervals(model.lower[a], model.upper[a], cfg.n1, cfg.kappa,
                                      arc_rng(cfg.seed, STREAM_SUBINTERVALS, a))
                    for a in range(graph.arc_count)]
    if cfg.use_expectation:
        statements = 1 + _longest_arc_count(graph, source, sink)
    else:
        statements = 0
    seen: set[int] = set()
    rounds = 0
    while True:
        rounds += 1
        if cfg.n1 * graph.arc_count + statements == 0:
            eta = cfg.eta0
        else:
            eta = bonferroni_eta(cfg.eta0, cfg.n1, graph.arc_count, statements)
        amb = _quantile_part(graph, model, samples, cfg, eta, subintervals)
        c_max = worst_case_costs(amb)
        if not cfg.use_expectation:
            paths: list[Path] = []
            break
        paths = near_optimal_paths(graph, c_max, source, sink)
        seen.add(statements)
        if len(paths) == statements:
            break
        if len(paths) in seen or rounds >= 6:
            # keep the conservative count to stay within the total budget
            if len(paths) > statements:
                statements = len(paths)
                continue
            break
        statements = len(paths)
    rows = []
    for p in paths:
        arcs = list(p.arc_ids)
        totals = samples[:, arcs].sum(axis=1)
        rows.extend(expectation_from_samples(totals, arcs, float(model.lower[arcs].sum()),
                                             float(model.upper[arcs].sum()), eta))
    amb = amb.with_expectations(rows)
    if return_info:
        c_max.flags.writeable = False
        return amb, AmbiguityInfo(eta, cfg.n1 * graph.arc_count + statements,
                                  tuple(paths), c_max, rounds)
    return amb


def _longest_arc_count(graph: DirectedGraph, s: int, t: int) -> int:
    order = graph.topological_order()
    if order is None:
        return graph.node_count - 1
    best = {s: 0}
    for u in order:
        if u not in best:
            continue
        for a in graph.out_arcs[u]:
            v = graph.heads[a]
            best[v] = max(best.get(v, -1), best[u] + 1)
    return best.get(t, 0)


def relative_expected_loss(path: Path, model: NominalModel, graph: DirectedGraph,
                           source: int | None = None, sink: int | None = None) -> float:
    """Nominal expected cost of ``path`` over the best achievable nominal expected cost."""
    if source is None or sink is None:
        source, sink = layered_terminals(graph)
    mean = model.mean
    _, best = shortest_path(graph, mean, source, sink)
    value = path.cost(mean)
    if best <= 0.0:
        return 1.0 if value <= 0.0 else math.inf
    return max(1.0, value / best)


def example1_graph() -> tuple[DirectedGraph, int, int]:
    """Four-node network; arcs 1-2, 2-4, 1-3, 2-3, 3-4 with nodes renumbered from 0."""
    return DirectedGraph.from_arcs(4, [(0, 1), (1, 3), (0, 2), (1, 2), (2, 3)]), 0, 3


def example1_ambiguity() -> AmbiguitySet:
    """Supports ``[0, 100]`` except ``[1, 101]`` on arc 1; arc 0 has ``P([70, 100]) <= 0.1``."""
    return AmbiguitySet((
        ArcAmbiguity.build(0, 100, [QuantileConstraint(70, 100, 0.0, 0.1)]),
        ArcAmbiguity.build(1, 101),
        ArcAmbiguity.build(0, 100),
        ArcAmbiguity.build(0, 100),
        ArcAmbiguity.build(0, 100),
    ))


def example1_nominal() -> NominalModel:
    """Uniform marginals; arc 0 mixes ``U(0, 70)`` and ``U(70, 100)`` with weights 0.95 and 0.05."""
    lower = np.array([0.0, 1.0, 0.0, 0.0, 0.0])
    upper = np.array([100.0, 101.0, 100.0, 100.0, 100.0])
    ones = np.ones(5)
    mix = {0: ((0.95, 0.0, 70.0, 1.0, 1.0), (0.05, 70.0, 100.0, 1.0, 1.0))}
    return NominalModel(lower, upper, ones, ones, 1.0 / 12.0, mix)
