"""Shortest and k-shortest simple paths under hop or weight-derived costs.

Distances come from scipy's Dijkstra run from the target; the path itself
is then walked forward from the source, always stepping to the smallest
neighbor id that stays on a minimum-cost route. That yields the
lexicographically smallest node sequence among all minimum-cost paths.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .embed_io import DEFAULT_MARKER, Vocabulary, display_name
from .graph import ConceptualSpace, dot_quote

METRICS = ("hop", "one_minus_w", "inverse_w")
_TIE_RTOL = 1e-12


class MetricError(ValueError):
    def __init__(self, metric: str, u: int, v: int, w: float, why: str):
        super().__init__(f"metric {metric!r} is infeasible: edge ({u}, {v}) has weight {w!r} ({why})")
        self.edge = (u, v, w)


@dataclass(frozen=True)
class PathResult:
    nodes: tuple[int, ...]
    hop_length: float
    metric_length: float
    metric: str

    @property
    def reachable(self) -> bool:
        return bool(self.nodes)

    def to_json(self, vocab: Vocabulary | None = None, marker: str = DEFAULT_MARKER) -> dict:
        names = [display_name(vocab[i], marker) for i in self.nodes] if vocab else None
        return {
            "reachable": self.reachable,
            "node_ids": list(self.nodes),
            "nodes": names,
            "hop_length": int(self.hop_length) if self.reachable else None,
            "metric": self.metric,
            "metric_length": self.metric_length if self.reachable else None,
        }


def unreachable(metric: str) -> PathResult:
    return PathResult((), math.inf, math.inf, metric)


def edge_costs(g: ConceptualSpace, metric: str) -> np.ndarray:
    """Per-entry costs aligned with ``g.indices`` (cached on the graph)."""
    key = ("costs", metric)
    if key in g._cache:
        return g._cache[key]
    w = g.weights
    if metric == "hop":
        cost = np.ones(len(w))
    elif metric == "one_minus_w":
        bad = np.flatnonzero(w >= 1.0)
        if len(bad):
            raise MetricError(metric, *_entry_edge(g, bad[0]), "needs w < 1")
        cost = 1.0 - w
    elif metric == "inverse_w":
        bad = np.flatnonzero(w <= 0.0)
        if len(bad):
            raise MetricError(metric, *_entry_edge(g, bad[0]), "needs w > 0")
        cost = 1.0 / w
    else:
        raise ValueError(f"unknown metric {metric!r}; choose from {METRICS}")
    cost.flags.writeable = False
    g._cache[key] = cost
    return cost


def _entry_edge(g: ConceptualSpace, pos: int) -> tuple[int, int, float]:
    u = int(np.searchsorted(g.indptr, pos, side="right") - 1)
    return u, int(g.indices[pos]), float(g.weights[pos])


def path_cost(g: ConceptualSpace, nodes: Sequence[int], metric: str) -> float:
    """Sum of edge costs along ``nodes``, accumulated left to right."""
    costs = edge_costs(g, metric)
    total = 0.0
    for a, b in zip(nodes, nodes[1:]):
        lo, hi = g.indptr[a], g.indptr[a + 1]
        pos = lo + int(np.searchsorted(g.indices[lo:hi], b))
        if pos >= hi or g.indices[pos] != b:
            raise ValueError(f"({a}, {b}) is not an edge")
        total += float(costs[pos])
    return total


def _result(g: ConceptualSpace, nodes: Sequence[int], metric: str) -> PathResult:
    nodes = tuple(int(x) for x in nodes)
    return PathResult(nodes, len(nodes) - 1, path_cost(g, nodes, metric), metric)


class _Restricted:
    """Cost graph with some nodes and undirected edges removed."""

    def __init__(self, g: ConceptualSpace, metric: str, removed_nodes: Iterable[int] = (),
                 removed_edges: Iterable[tuple[int, int]] = ()):
        self.g = g
        self.costs = edge_costs(g, metric)
        self.dead = np.zeros(g.n, bool)
        self.dead[list(removed_nodes)] = True
        self.cut: set[tuple[int, int]] = set()
        for a, b in removed_edges:
            self.cut.add((a, b))
            self.cut.add((b, a))
        if not self.dead.any() and not self.cut:
            self.csr = g.to_csr(self.costs)
            return
        rows = np.repeat(np.arange(g.n), g.degrees)
        keep = ~(self.dead[rows] | self.dead[g.indices])
        for a, b in self.cut:
            lo, hi = g.indptr[a], g.indptr[a + 1]
            pos = lo + int(np.searchsorted(g.indices[lo:hi], b))
            if pos < hi and g.indices[pos] == b:
                keep[pos] = False
        indptr = np.zeros(g.n + 1, np.int64)
        np.cumsum(np.bincount(rows[keep], minlength=g.n), out=indptr[1:])
        self.csr = sparse.csr_matrix((self.costs[keep], g.indices[keep], indptr), shape=(g.n, g.n))

    def shortest(self, source: int, target: int) -> list[int] | None:
        if self.dead[source] or self.dead[target]:
            return None
        if source == target:
            return [source]
        dist = csgraph.dijkstra(self.csr, directed=False, indices=target)
        if math.isinf(dist[source]):
            return None
        g, costs = self.g, self.costs
        path = [source]
        x = source
        while x != target:
            lo, hi = g.indptr[x], g.indptr[x + 1]
            remaining = dist[x]
            tol = _TIE_RTOL * max(1.0, remaining)
            step = None
            for pos in range(lo, hi):
                y = int(g.indices[pos])
                if self.dead[y] or (x, y) in self.cut:
                    continue
                if abs(costs[pos] + dist[y] - remaining) <= tol and dist[y] < remaining:
                    step = y
                    break
            if step is None:  # pragma: no cover - dist guarantees a successor
                raise RuntimeError("failed to trace a shortest path")
            path.append(step)
            x = step
        return path


def shortest_path(g: ConceptualSpace, u: int, v: int, metric: str = "hop") -> PathResult:
    for x in (u, v):
        if not 0 <= x < g.n:
            raise IndexError(f"node {x} out of range 0..{g.n - 1}")
    nodes = _Restricted(g, metric).shortest(u, v)
    if nodes is None:
        return unreachable(metric)
    return _result(g, nodes, metric)


def k_shortest_paths(g: ConceptualSpace, u: int, v: int, k: int, metric: str = "hop") -> list[PathResult]:
    """Yen's algorithm; ties ordered by lexicographically smallest node sequence."""
    if u == v:
        raise ValueError("k-shortest paths need distinct endpoints")
    if k < 1:
        raise ValueError("k must be at least 1")
    first = shortest_path(g, u, v, metric)
    if not first.reachable:
        return []
    found = [first]
    candidates: list[tuple[float, tuple[int, ...]]] = []
    seen = {first.nodes}
    while len(found) < k:
        prev = found[-1].nodes
        for i in range(len(prev) - 1):
            root = prev[:i + 1]
            cut = {(p.nodes[i], p.nodes[i + 1]) for p in found
                   if len(p.nodes) > i + 1 and p.nodes[:i + 1] == root}
            spur = _Restricted(g, metric, removed_nodes=root[:-1], removed_edges=cut).shortest(root[-1], v)
            if spur is None:
                continue
            nodes = root[:-1] + tuple(spur)
            if nodes in seen:
                continue
            seen.add(nodes)
            heapq.heappush(candidates, (path_cost(g, nodes, metric), nodes))
        if not candidates:
            break
        _, nodes = heapq.heappop(candidates)
        found.append(_result(g, nodes, metric))
    return found


def distance_rows(g: ConceptualSpace, sources: Sequence[int], metric: str = "hop") -> np.ndarray:
    """Shortest-path cost from each source to every node (inf if unreachable)."""
    sources = np.asarray(sources, np.int64)
    if metric == "hop":
        return csgraph.shortest_path(g.adjacency(), method="D", unweighted=True, directed=False,
                                     indices=sources).reshape(len(sources), g.n)
    return csgraph.dijkstra(g.to_csr(edge_costs(g, metric)), directed=False,
                            indices=sources).reshape(len(sources), g.n)


@dataclass
class PairLengths:
    lengths: list[float]
    unreachable: int

    @property
    def mean(self) -> float | None:
        return float(np.mean(self.lengths)) if self.lengths else None


def pair_lengths_from_rows(dist: np.ndarray, index: dict[int, int], a: Sequence[int],
                           b: Sequence[int], within: bool) -> PairLengths:
    if within:
        pairs = [(a[i], a[j]) for i in range(len(a)) for j in range(i + 1, len(a))]
    else:
        pairs = [(x, y) for x in a for y in b]
    out, missing = [], 0
    for x, y in pairs:
        d = float(dist[index[x], y])
        if math.isinf(d):
            missing += 1
        else:
            out.append(d)
    return PairLengths(out, missing)


def group_pair_lengths(g: ConceptualSpace, group_a: Sequence[int], group_b: Sequence[int],
                       metric: str = "hop") -> PairLengths:
    """Within-group pairs when the groups are identical, else all cross pairs."""
    if not len(group_a) or not len(group_b):
        raise ValueError("groups must be non-empty")
    a, b = [int(x) for x in group_a], [int(x) for x in group_b]
    within = a == b
    srcs = sorted(set(a))
    dist = distance_rows(g, srcs, metric)
    return pair_lengths_from_rows(dist, {s: i for i, s in enumerate(srcs)}, a, b, within)


# -- export ----------------------------------------------------------------

def write_paths_json(paths: Sequence[PathResult], path: str | Path, vocab: Vocabulary | None = None,
                     marker: str = DEFAULT_MARKER, extra: dict | None = None) -> None:
    doc = dict(extra or {})
    doc["paths"] = [p.to_json(vocab, marker) for p in paths]
    Path(path).write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def write_paths_dot(g: ConceptualSpace, paths: Sequence[PathResult], path: str | Path,
                    vocab: Vocabulary | None = None, marker: str = DEFAULT_MARKER) -> None:
    """Union of the paths as a DOT graph; the first (minimum-cost) path is red."""
    best = paths[0].nodes if paths else ()
    best_edges = {frozenset(e) for e in zip(best, best[1:])}
    nodes: list[int] = []
    edges: list[tuple[int, int]] = []
    seen_e = set()
    for p in paths:
        for x in p.nodes:
            if x not in nodes:
                nodes.append(x)
        for e in zip(p.nodes, p.nodes[1:]):
            key = frozenset(e)
            if key not in seen_e:
                seen_e.add(key)
                edges.append(e)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("graph paths {\n")
        for x in nodes:
            label = display_name(vocab[x], marker) if vocab else str(x)
            attrs = f"label={dot_quote(label)}"
            if x in best:
                attrs += ", color=red, fontcolor=red"
            fh.write(f"  {x} [{attrs}];\n")
        for a, b in edges:
            w = g.weight(a, b)
            attrs = f"weight={w:.6g}, penwidth={1 + 4 * max(w, 0):.3f}"
            if frozenset((a, b)) in best_edges:
                attrs += ", color=red, shortest=true"
            fh.write(f"  {a} -- {b} [{attrs}];\n")
        fh.write("}\n")
