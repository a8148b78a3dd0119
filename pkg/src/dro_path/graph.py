"""Directed graphs, shortest paths and the flow-balance encoding of s-t paths.

Node and arc identifiers are dense integers. Whenever several optimal paths
exist, the one with the lexicographically smallest arc-id sequence is returned,
so every solver in the package breaks ties the same way.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import CapExceeded, NegativeCycle, NoPath

__all__ = [
    "DirectedGraph",
    "Path",
    "FlowSystem",
    "shortest_path",
    "flow_system",
    "near_optimal_paths",
    "enumerate_paths",
    "path_from_incidence",
]

_TIGHT_RTOL = 1e-9


@dataclass(frozen=True)
class DirectedGraph:
    """Immutable directed graph with arcs ``0..len(tails)-1``.

    Parameters
    ----------
    node_count : int
        Number of nodes; nodes are ``0..node_count-1``.
    tails, heads : sequence of int
        ``tails[a] -> heads[a]`` is arc ``a``.
    """

    node_count: int
    tails: tuple[int, ...]
    heads: tuple[int, ...]
    out_arcs: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)
    in_arcs: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        tails = tuple(int(v) for v in self.tails)
        heads = tuple(int(v) for v in self.heads)
        if len(tails) != len(heads):
            raise ValueError("tails and heads differ in length")
        n = int(self.node_count)
        if n < 1:
            raise ValueError("graph needs at least one node")
        out = [[] for _ in range(n)]
        inc = [[] for _ in range(n)]
        for a, (u, v) in enumerate(zip(tails, heads)):
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"arc {a} references a node outside 0..{n - 1}")
            if u == v:
                raise ValueError(f"arc {a} is a self-loop at node {u}")
            out[u].append(a)
            inc[v].append(a)
        object.__setattr__(self, "node_count", n)
        object.__setattr__(self, "tails", tails)
        object.__setattr__(self, "heads", heads)
        object.__setattr__(self, "out_arcs", tuple(tuple(x) for x in out))
        object.__setattr__(self, "in_arcs", tuple(tuple(x) for x in inc))
        if not self._weakly_connected():
            raise ValueError("graph is not connected")

    @classmethod
    def from_arcs(cls, node_count: int, arcs: Iterable[tuple[int, int]]) -> "DirectedGraph":
        arcs = list(arcs)
        return cls(node_count, tuple(u for u, _ in arcs), tuple(v for _, v in arcs))

    @property
    def arc_count(self) -> int:
        return len(self.tails)

    def arcs(self):
        """Yield ``(arc_id, tail, head)`` in id order."""
        return zip(range(self.arc_count), self.tails, self.heads)

    def _weakly_connected(self) -> bool:
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for a in self.out_arcs[u]:
                v = self.heads[a]
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
            for a in self.in_arcs[u]:
                v = self.tails[a]
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == self.node_count

    def topological_order(self) -> list[int] | None:
        """Kahn order of the nodes, or ``None`` when the graph has a cycle."""
        indeg = [len(x) for x in self.in_arcs]
        ready = [v for v in range(self.node_count) if indeg[v] == 0]
        heapq.heapify(ready)
        order = []
        while ready:
            u = heapq.heappop(ready)
            order.append(u)
            for a in self.out_arcs[u]:
                v = self.heads[a]
                indeg[v] -= 1
                if indeg[v] == 0:
                    heapq.heappush(ready, v)
        return order if len(order) == self.node_count else None

    @property
    def is_acyclic(self) -> bool:
        cached = self.__dict__.get("_acyclic")
        if cached is None:
            cached = self.topological_order() is not None
            object.__setattr__(self, "_acyclic", cached)
        return cached

    def to_dict(self, source: int, sink: int) -> dict:
        return {
            "nodes": self.node_count,
            "source": int(source),
            "sink": int(sink),
            "arcs": [{"id": a, "tail": u, "head": v} for a, u, v in self.arcs()],
        }

    @classmethod
    def from_dict(cls, data: dict) -> tuple["DirectedGraph", int, int]:
        """Parse the graph JSON schema; returns ``(graph, source, sink)``."""
        arcs = sorted(data["arcs"], key=lambda d: int(d["id"]))
        ids = [int(d["id"]) for d in arcs]
        if ids != list(range(len(ids))):
            raise ValueError("arc ids must be dense and unique, 0..|A|-1")
        graph = cls.from_arcs(int(data["nodes"]), [(int(d["tail"]), int(d["head"])) for d in arcs])
        return graph, int(data["source"]), int(data["sink"])


@dataclass(frozen=True, order=True)
class Path:
    """A simple s-t path stored as its arc-id sequence.

    Paths order lexicographically by ``arc_ids``, which is the package-wide
    tie-break between equally good paths.
    """

    arc_ids: tuple[int, ...]
    arc_count: int = field(compare=False)

    @property
    def incidence(self) -> np.ndarray:
        y = np.zeros(self.arc_count, dtype=np.int8)
        y[list(self.arc_ids)] = 1
        return y

    def __len__(self):
        return len(self.arc_ids)

    def __iter__(self):
        return iter(self.arc_ids)

    def __contains__(self, arc):
        return arc in self.arc_ids

    def nodes(self, graph: DirectedGraph) -> list[int]:
        if not self.arc_ids:
            return []
        return [graph.tails[self.arc_ids[0]]] + [graph.heads[a] for a in self.arc_ids]

    def cost(self, costs) -> float:
        return math.fsum(float(costs[a]) for a in self.arc_ids)

    def is_valid(self, graph: DirectedGraph, s: int, t: int) -> bool:
        if not self.arc_ids or self.arc_count != graph.arc_count:
            return False
        nodes = self.nodes(graph)
        for prev, nxt in zip(self.arc_ids, self.arc_ids[1:]):
            if graph.heads[prev] != graph.tails[nxt]:
                return False
        return nodes[0] == s and nodes[-1] == t and len(set(nodes)) == len(nodes)


@dataclass(frozen=True)
class FlowSystem:
    """Node-arc incidence equations ``node_arc_matrix @ y == rhs``."""

    node_arc_matrix: np.ndarray
    rhs: np.ndarray

    def is_satisfied(self, y) -> bool:
        return bool(np.array_equal(self.node_arc_matrix @ np.asarray(y, dtype=np.int64), self.rhs))


def flow_system(graph: DirectedGraph, s: int, t: int) -> FlowSystem:
    """Flow-balance matrix: +1 where the arc leaves the node, -1 where it enters."""
    if s == t:
        raise ValueError("source and sink must differ")
    G = np.zeros((graph.node_count, graph.arc_count), dtype=np.int64)
    cols = np.arange(graph.arc_count)
    G[np.asarray(graph.tails, dtype=np.int64), cols] = 1
    G[np.asarray(graph.heads, dtype=np.int64), cols] = -1
    g = np.zeros(graph.node_count, dtype=np.int64)
    g[s] = 1
    g[t] = -1
    G.setflags(write=False)
    g.setflags(write=False)
    return FlowSystem(G, g)


def _dist_to_sink(graph, costs, t, excluded, method):
    """Distance from every node to ``t`` (inf when unreachable)."""
    n = graph.node_count
    dist = [math.inf] * n
    dist[t] = 0.0
    live = [a for a in range(graph.arc_count) if a not in excluded]
    if method == "dijkstra":
        done = [False] * n
        heap = [(0.0, t)]
        while heap:
            d, v = heapq.heappop(heap)
            if done[v]:
                continue
            done[v] = True
            for a in graph.in_arcs[v]:
                if a in excluded:
                    continue
                u = graph.tails[a]
                nd = d + costs[a]
                if nd < dist[u]:
                    dist[u] = nd
                    heapq.heappush(heap, (nd, u))
    elif method == "dag":
        order = graph.topological_order()
        if order is None:
            raise ValueError("dag relaxation requested on a cyclic graph")
        for u in reversed(order):
            best = dist[u]
            for a in graph.out_arcs[u]:
                if a in excluded:
                    continue
                nd = costs[a] + dist[graph.heads[a]]
                if nd < best:
                    best = nd
            dist[u] = best
    elif method == "bellman_ford":
        for _ in range(n):
            changed = False
            for a in live:
                v = graph.heads[a]
                if dist[v] == math.inf:
                    continue
                nd = costs[a] + dist[v]
                u = graph.tails[a]
                if nd < dist[u]:
                    dist[u] = nd
                    changed = True
            if not changed:
                break
        else:
            raise NegativeCycle("negative-cost cycle detected")
    else:
        raise ValueError(f"unknown method {method!r}")
    return dist


def _lexmin_tight_path(graph, costs, dist, s, t, excluded):
    """Lexicographically smallest simple path that only uses tight arcs."""
    def tight(a):
        u, v = graph.tails[a], graph.heads[a]
        if dist[v] == math.inf:
            return False
        slack = costs[a] + dist[v] - dist[u]
        return abs(slack) <= _TIGHT_RTOL * max(1.0, abs(dist[u]), abs(costs[a]))

    on_path = {s}
    arcs: list[int] = []
    iters = [iter(graph.out_arcs[s])]
    while iters:
        advanced = False
        for a in iters[-1]:
            if a in excluded or not tight(a):
                continue
            v = graph.heads[a]
            if v in on_path:
                continue
            arcs.append(a)
            if v == t:
                return arcs
            on_path.add(v)
            iters.append(iter(graph.out_arcs[v]))
            advanced = True
            break
        if not advanced:
            iters.pop()
            if arcs:
                on_path.discard(graph.heads[arcs.pop()])
    raise NoPath(f"no tight path from {s} to {t}")


def shortest_path(graph: DirectedGraph, costs, s: int, t: int, *, excluded: Iterable[int] = (),
                  method: str = "auto") -> tuple[Path, float]:
    """Minimum-cost simple s-t path.

    Parameters
    ----------
    graph : DirectedGraph
    costs : array_like
        One cost per arc.
    s, t : int
        Source and sink.
    excluded : iterable of int, optional
        Arcs treated as deleted.
    method : {"auto", "dijkstra", "dag", "bellman_ford"}
        ``"auto"`` uses Dijkstra for nonnegative costs, topological relaxation
        for acyclic graphs and Bellman-Ford otherwise.

    Returns
    -------
    path : Path
        The optimal path with the lexicographically smallest arc-id sequence.
    cost : float
        Its total cost.

    Raises
    ------
    NoPath
        If ``t`` is unreachable from ``s``.
    NegativeCycle
        If negative costs create a negative cycle.
    """
    if s == t:
        raise ValueError("source and sink must differ")
    costs = [float(c) for c in costs]
    if len(costs) != graph.arc_count:
        raise ValueError("need one cost per arc")
    excluded = frozenset(excluded)
    if method == "auto":
        if min(costs, default=0.0) >= 0:
            method = "dijkstra"
        elif graph.is_acyclic:
            method = "dag"
        else:
            method = "bellman_ford"
    elif method == "dijkstra" and min(costs, default=0.0) < 0:
        raise ValueError("Dijkstra needs nonnegative costs")
    dist = _dist_to_sink(graph, costs, t, excluded, method)
    if dist[s] == math.inf:
        raise NoPath(f"node {t} is unreachable from {s}")
    path = Path(tuple(_lexmin_tight_path(graph, costs, dist, s, t, excluded)), graph.arc_count)
    return path, path.cost(costs)


def near_optimal_paths(graph: DirectedGraph, costs, s: int, t: int) -> list[Path]:
    """The shortest path plus, for each of its arcs, the shortest path avoiding that arc.

    Duplicates are dropped (first occurrence kept) and removals that disconnect
    ``s`` from ``t`` are skipped.
    """
    best, _ = shortest_path(graph, costs, s, t)
    found = [best]
    for a in best.arc_ids:
        try:
            alt, _ = shortest_path(graph, costs, s, t, excluded=(a,))
        except NoPath:
            continue
        if alt not in found:
            found.append(alt)
    return found


def enumerate_paths(graph: DirectedGraph, s: int, t: int, cap: int = 10_000) -> list[Path]:
    """All simple s-t paths in lexicographic arc-id order.

    Raises
    ------
    CapExceeded
        As soon as more than ``cap`` paths have been found.
    """
    if cap < 1:
        raise ValueError("cap must be at least 1")
    if s == t:
        raise ValueError("source and sink must differ")
    paths: list[Path] = []
    on_path = {s}
    arcs: list[int] = []
    iters = [iter(graph.out_arcs[s])]
    while iters:
        for a in iters[-1]:
            v = graph.heads[a]
            if v in on_path:
                continue
            if v == t:
                paths.append(Path(tuple(arcs + [a]), graph.arc_count))
                if len(paths) > cap:
                    raise CapExceeded(f"more than {cap} simple paths")
                continue
            arcs.append(a)
            on_path.add(v)
            iters.append(iter(graph.out_arcs[v]))
            break
        else:
            iters.pop()
            if arcs:
                on_path.discard(graph.heads[arcs.pop()])
    return paths


def path_from_incidence(graph: DirectedGraph, y: Sequence[float], s: int, t: int,
                        tol: float = 1e-6) -> Path:
    """Walk the arcs with ``y ~ 1`` from ``s`` to ``t``, discarding cycles.

    When several chosen arcs leave a node the smallest id is tried first; a
    walk that closes a cycle removes that cycle and resumes.
    """
    chosen = [a for a in range(graph.arc_count) if y[a] > 1.0 - tol]
    out: dict[int, list[int]] = {}
    for a in chosen:
        out.setdefault(graph.tails[a], []).append(a)
    arcs: list[int] = []
    position = {s: 0}
    u = s
    while u != t:
        nxt = out.get(u)
        if not nxt:
            raise NoPath("incidence vector does not contain an s-t path")
        a = nxt[0]
        v = graph.heads[a]
        if v in position:
            cut = position[v]
            for b in arcs[cut:] + [a]:
                out[graph.tails[b]].remove(b)
            for b in arcs[cut:]:
                position.pop(graph.heads[b], None)
            del arcs[cut:]
            u = v
            continue
        arcs.append(a)
        position[v] = len(arcs)
        u = v
    return Path(tuple(arcs), graph.arc_count)
