"""The conceptual space graph, connectivity sweeps and subgraph algebra."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .embed_io import DEFAULT_MARKER, EmbeddingMatrix, Vocabulary, display_name
from .simgraph import (EdgeArray, edge_count_for_ratio, pair_count, read_edges_csv,
                       top_edges, write_edges_csv)


class GraphError(ValueError):
    pass


class ConceptualSpace:
    """Immutable undirected weighted graph on nodes 0..n-1.

    Adjacency is stored CSR-style: ``indices[indptr[u]:indptr[u + 1]]`` are
    the neighbors of ``u`` in ascending order, ``weights`` aligned with them.
    """

    def __init__(self, n: int, indptr: np.ndarray, indices: np.ndarray, weights: np.ndarray):
        self.n = int(n)
        self.indptr = indptr
        self.indices = indices
        self.weights = weights
        for arr in (indptr, indices, weights):
            arr.flags.writeable = False
        self._cache: dict = {}

    def __repr__(self) -> str:
        return f"ConceptualSpace(n={self.n}, edges={self.edge_count})"

    @property
    def edge_count(self) -> int:
        return len(self.indices) // 2

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def strengths(self) -> np.ndarray:
        if "strengths" not in self._cache:
            rows = np.repeat(np.arange(self.n), self.degrees)
            self._cache["strengths"] = np.bincount(rows, weights=self.weights, minlength=self.n)
        return self._cache["strengths"]

    def neighbors(self, u: int) -> np.ndarray:
        return self.indices[self.indptr[u]:self.indptr[u + 1]]

    def neighbor_weights(self, u: int) -> np.ndarray:
        return self.weights[self.indptr[u]:self.indptr[u + 1]]

    def weight(self, u: int, v: int) -> float | None:
        lo, hi = self.indptr[u], self.indptr[u + 1]
        pos = lo + np.searchsorted(self.indices[lo:hi], v)
        if pos < hi and self.indices[pos] == v:
            return float(self.weights[pos])
        return None

    def has_edge(self, u: int, v: int) -> bool:
        return self.weight(u, v) is not None

    def edges(self) -> EdgeArray:
        """Canonical edge list (u < v), ordered by (u, v)."""
        rows = np.repeat(np.arange(self.n), self.degrees)
        keep = rows < self.indices
        return EdgeArray(rows[keep], self.indices[keep].astype(np.int64), self.weights[keep])

    def to_csr(self, data: np.ndarray | None = None) -> sparse.csr_matrix:
        data = self.weights if data is None else data
        return sparse.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))

    def adjacency(self) -> sparse.csr_matrix:
        """0/1 int64 adjacency matrix (cached)."""
        if "adj" not in self._cache:
            self._cache["adj"] = self.to_csr(np.ones(len(self.indices), np.int64))
        return self._cache["adj"]

    @property
    def min_weight(self) -> float | None:
        return float(self.weights.min()) if len(self.weights) else None


def build(n: int, edges: EdgeArray | Iterable[tuple[int, int, float]]) -> ConceptualSpace:
    if not isinstance(edges, EdgeArray):
        edges = EdgeArray.from_edges(list(edges))
    u, v, w = edges.u.astype(np.int64), edges.v.astype(np.int64), edges.w.astype(np.float64)
    if len(u):
        if u.min() < 0 or v.max() >= n or v.min() < 0 or u.max() >= n:
            bad = int(np.flatnonzero((u < 0) | (u >= n) | (v < 0) | (v >= n))[0])
            raise GraphError(f"edge ({u[bad]}, {v[bad]}) has an endpoint outside 0..{n - 1}")
        if (u >= v).any():
            bad = int(np.flatnonzero(u >= v)[0])
            raise GraphError(f"edge ({u[bad]}, {v[bad]}) is not in canonical u < v orientation")
        keys = u * n + v
        uniq, counts = np.unique(keys, return_counts=True)
        if (counts > 1).any():
            k = int(uniq[counts > 1][0])
            raise GraphError(f"duplicate edge ({k // n}, {k % n})")
    rows = np.concatenate([u, v])
    cols = np.concatenate([v, u])
    data = np.concatenate([w, w])
    order = np.lexsort((cols, rows))
    indptr = np.zeros(n + 1, np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
    return ConceptualSpace(n, indptr, cols[order], data[order])


# -- components ------------------------------------------------------------

def component_labels(g: ConceptualSpace) -> tuple[int, np.ndarray]:
    """Component count and labels numbered by each component's smallest node."""
    count, raw = csgraph.connected_components(g.adjacency(), directed=False)
    _, first = np.unique(raw, return_index=True)
    rank = np.empty(count, np.int64)
    rank[np.argsort(first)] = np.arange(count)
    return int(count), rank[raw]


def component_count(g: ConceptualSpace) -> int:
    return component_labels(g)[0]


class UnionFind:
    """Disjoint sets with union by size and path halving."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n
        self.components = n

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.components -= 1
        return True


@dataclass
class SweepResult:
    points: list[tuple[float, int]]
    edge_counts: list[int]
    minimal_k: float | None
    pair_convention: str

    def rows(self):
        for (k, c), m in zip(self.points, self.edge_counts):
            yield {"k": k, "edges": m, "components": c, "log10_components": math.log10(c)}


def _sweep_counts(n: int, edges: EdgeArray, counts: Sequence[int]) -> list[int]:
    uf = UnionFind(n)
    us, vs = edges.u.tolist(), edges.v.tolist()
    out, pos = [], 0
    for c in counts:
        while pos < c:
            uf.union(us[pos], vs[pos])
            pos += 1
        out.append(uf.components)
    return out


def sweep_k(m: EmbeddingMatrix, k_grid: Sequence[float], pair_convention: str = "half_off_diagonal",
            block_rows: int = 1024) -> SweepResult:
    """Component counts of the top-K graph for each K, from a single selection."""
    if not len(k_grid):
        raise ValueError("empty K grid")
    grid = [float(k) for k in k_grid]
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("K grid must be ascending")
    counts = [edge_count_for_ratio(m.rows, k, pair_convention) for k in grid]
    edges = top_edges(m, counts[-1], block_rows=block_rows)
    comps = _sweep_counts(m.rows, edges, counts)
    minimal = next((k for k, c in zip(grid, comps) if c == 1), None)
    return SweepResult(list(zip(grid, comps)), counts, minimal, pair_convention)


@dataclass
class MinimalK:
    rank: int
    k_ratio: Fraction
    pair_convention: str
    threshold: float
    sweep: SweepResult
    edges: EdgeArray = field(repr=False)

    @property
    def k(self) -> float:
        return float(self.k_ratio)


def minimal_connecting_rank(n: int, edges: EdgeArray) -> int | None:
    """1-based rank of the edge that first joins everything, or None."""
    uf = UnionFind(n)
    if n == 1:
        return 0
    for rank, (a, b) in enumerate(zip(edges.u.tolist(), edges.v.tolist()), start=1):
        if uf.union(a, b) and uf.components == 1:
            return rank
    return None


def minimal_connecting_k(m: EmbeddingMatrix, resolution: int = 20,
                         pair_convention: str = "half_off_diagonal",
                         block_rows: int = 1024) -> MinimalK:
    """Exact first-connecting edge rank r*, reported as K = r*/P.

    Edges are selected in growing batches (x4) until union-find reaches a
    single component. ``resolution`` grid points, log-spaced between the
    spanning-tree size n-1 and r*, form the reported sweep curve.
    """
    n = m.rows
    total = n * (n - 1) // 2
    count = min(total, max(n - 1, 4 * n))
    while True:
        edges = top_edges(m, count, block_rows=block_rows)
        rank = minimal_connecting_rank(n, edges)
        if rank is not None or count == total:
            break
        count = min(total, 4 * count)
    assert rank is not None  # the complete graph is connected
    P = pair_count(n, pair_convention)
    counts = sorted(set(int(round(x)) for x in np.geomspace(max(1, n - 1), rank, max(2, resolution)))
                    | {rank})
    counts = [c for c in counts if c <= rank]
    comps = _sweep_counts(n, edges, counts)
    ks = [float(Fraction(c) / P) for c in counts]
    sweep = SweepResult(list(zip(ks, comps)), counts, float(Fraction(rank) / P), pair_convention)
    return MinimalK(rank, Fraction(rank) / P, pair_convention, float(edges.w[rank - 1]), sweep,
                    edges[:rank])


def common_k(ks: Sequence[float | Fraction], precision: int = 3) -> float:
    """Largest of the per-model minimal K values, rounded up to ``precision`` decimals."""
    top = max(Fraction(k) if isinstance(k, Fraction) else Fraction(repr(float(k))) for k in ks)
    scale = 10 ** precision
    return math.ceil(top * scale) / scale


# -- subgraphs -------------------------------------------------------------

def induced_subgraph(g: ConceptualSpace, nodes: Iterable[int]) -> tuple[ConceptualSpace, dict[int, int]]:
    """Subgraph on ``nodes``; new ids follow ascending old ids."""
    keep = np.unique(np.fromiter((int(x) for x in nodes), np.int64))
    if len(keep) and (keep[0] < 0 or keep[-1] >= g.n):
        raise GraphError(f"node ids must lie in 0..{g.n - 1}")
    remap = np.full(g.n, -1, np.int64)
    remap[keep] = np.arange(len(keep))
    e = g.edges()
    mask = (remap[e.u] >= 0) & (remap[e.v] >= 0)
    sub = EdgeArray(remap[e.u[mask]], remap[e.v[mask]], e.w[mask])
    return build(len(keep), sub), {int(o): i for i, o in enumerate(keep.tolist())}


def subgraph_union(a: Iterable[int], b: Iterable[int], g: ConceptualSpace):
    return induced_subgraph(g, set(a) | set(b))


def subgraph_intersection(a: Iterable[int], b: Iterable[int], g: ConceptualSpace):
    return induced_subgraph(g, set(a) & set(b))


# -- I/O -------------------------------------------------------------------

def save_graph(g: ConceptualSpace, path: str | Path) -> None:
    write_edges_csv(g.edges(), path, header=f"# n={g.n}")


def load_graph(path: str | Path) -> ConceptualSpace:
    edges, comments = read_edges_csv(path)
    n = None
    for line in comments:
        body = line.lstrip("#").strip()
        if body.startswith("n="):
            n = int(body[2:])
    if n is None:
        raise GraphError(f"{path}: missing '# n=<N>' header")
    return build(n, edges)


def node_labels(n: int, vocab: Vocabulary | None, marker: str = DEFAULT_MARKER) -> list[str]:
    if vocab is None:
        return [str(i) for i in range(n)]
    if len(vocab) < n:
        raise GraphError(f"vocabulary has {len(vocab)} tokens for {n} nodes")
    return [display_name(vocab[i], marker) for i in range(n)]


def write_graphml(g: ConceptualSpace, path: str | Path, vocab: Vocabulary | None = None,
                  marker: str = DEFAULT_MARKER) -> None:
    import networkx as nx

    labels = node_labels(g.n, vocab, marker)
    G = nx.Graph()
    for i, lab in enumerate(labels):
        G.add_node(i, label=lab)
    e = g.edges()
    G.add_weighted_edges_from(zip(e.u.tolist(), e.v.tolist(), e.w.tolist()))
    nx.write_graphml(G, str(path))


def dot_quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


def write_dot(g: ConceptualSpace, path: str | Path, vocab: Vocabulary | None = None,
              marker: str = DEFAULT_MARKER) -> None:
    labels = node_labels(g.n, vocab, marker)
    e = g.edges()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("graph conceptual_space {\n")
        for i, lab in enumerate(labels):
            fh.write(f"  {i} [label={dot_quote(lab)}];\n")
        for u, v, w in zip(e.u.tolist(), e.v.tolist(), e.w.tolist()):
            fh.write(f"  {u} -- {v} [weight={w:.6g}];\n")
        fh.write("}\n")
