"""Global network statistics: degrees, clustering, path lengths, null models."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy.sparse import csgraph

from .graph import ConceptualSpace, GraphError, build, component_labels, induced_subgraph
from .simgraph import EdgeArray

_ROW_CHUNK = 512


@dataclass
class DegreeStats:
    avg_degree: float
    std_degree: float
    avg_wdegree: float
    std_wdegree: float
    degrees: np.ndarray
    strengths: np.ndarray


@dataclass
class GlobalStats:
    nodes: int
    edges: int
    avg_degree: float
    std_degree: float
    avg_wdegree: float
    std_wdegree: float
    threshold: float | None
    gcc: float
    alcc: float
    diameter: int
    aspl: float
    mode: str
    sources: int | None = None
    seed: int | None = None

    def to_json(self) -> dict:
        """Three sections shaped like the usual basic / weighted / small-world table."""
        d = asdict(self)
        diameter_key = "diameter" if self.mode == "exact" else "diameter_lower_bound"
        return {
            "basic": {k: d[k] for k in ("nodes", "edges", "avg_degree", "std_degree")},
            "weighted": {"avg_degree_w": self.avg_wdegree, "std_degree_w": self.std_wdegree,
                         "threshold": self.threshold},
            "small_world": {"gcc": self.gcc, "alcc": self.alcc, diameter_key: self.diameter,
                            "aspl": self.aspl, "mode": self.mode, "sources": self.sources,
                            "seed": self.seed},
        }


def degree_stats(g: ConceptualSpace) -> DegreeStats:
    deg = g.degrees.astype(np.float64)
    s = g.strengths
    return DegreeStats(
        avg_degree=2 * g.edge_count / g.n,
        std_degree=float(deg.std()),
        avg_wdegree=float(s.mean()),
        std_wdegree=float(s.std()),
        degrees=g.degrees.copy(),
        strengths=s.copy(),
    )


def triangles_per_node(g: ConceptualSpace) -> np.ndarray:
    """Number of triangles through each node, in exact integer arithmetic."""
    A = g.adjacency()
    out = np.zeros(g.n, np.int64)
    for a in range(0, g.n, _ROW_CHUNK):
        block = A[a:a + _ROW_CHUNK]
        closed = (block @ A).multiply(block)
        out[a:a + _ROW_CHUNK] = np.asarray(closed.sum(axis=1)).ravel() // 2
    return out


def global_clustering(g: ConceptualSpace) -> float:
    """Transitivity: closed triples over connected triples (0 if none)."""
    deg = g.degrees.astype(np.int64)
    triples = int((deg * (deg - 1) // 2).sum())
    if triples == 0:
        return 0.0
    return int(triangles_per_node(g).sum()) / triples


def local_clustering(g: ConceptualSpace) -> np.ndarray:
    deg = g.degrees.astype(np.int64)
    possible = deg * (deg - 1) // 2
    tri = triangles_per_node(g)
    return np.where(possible > 0, tri / np.maximum(possible, 1), 0.0)


def avg_local_clustering(g: ConceptualSpace) -> float:
    """Mean local clustering over all nodes; degree 0/1 nodes count as 0."""
    return float(local_clustering(g).mean())


def _bfs_chunk(csr, sources: np.ndarray) -> tuple[int, int, int]:
    dist = csgraph.shortest_path(csr, method="D", unweighted=True, directed=False, indices=sources)
    if np.isinf(dist).any():
        return -1, 0, 0
    d = dist.astype(np.int64)
    return int(d.max()), int(d.sum()), d.size - len(sources)


def path_length_stats(g: ConceptualSpace, mode: str = "exact", sources: int | None = None,
                      seed: int = 0, largest_component: bool = False,
                      threads: int = 1) -> tuple[int, float]:
    """Hop-count diameter and average shortest path length.

    In ``sampled`` mode the diameter is the largest eccentricity among the
    sampled sources, i.e. a lower bound.
    """
    if largest_component:
        count, labels = component_labels(g)
        if count > 1:
            sizes = np.bincount(labels)
            g, _ = induced_subgraph(g, np.flatnonzero(labels == int(np.argmax(sizes))))
    if g.n < 2:
        raise GraphError("path statistics need at least two nodes")
    if mode == "exact":
        src = np.arange(g.n)
    elif mode == "sampled":
        if not sources or sources < 1:
            raise ValueError("sampled mode needs a positive source count")
        rng = np.random.default_rng(seed)
        src = np.sort(rng.choice(g.n, size=min(sources, g.n), replace=False))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    csr = g.adjacency()
    chunks = [src[a:a + _ROW_CHUNK] for a in range(0, len(src), _ROW_CHUNK)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(lambda c: _bfs_chunk(csr, c), chunks))
    else:
        results = [_bfs_chunk(csr, c) for c in chunks]
    if any(r[0] < 0 for r in results):
        raise GraphError("graph is disconnected; pass largest_component=True to restrict")
    diameter = max(r[0] for r in results)
    total = sum(r[1] for r in results)
    pairs = sum(r[2] for r in results)
    return diameter, total / pairs


def global_stats(g: ConceptualSpace, mode: str = "exact", sources: int | None = None,
                 seed: int = 0, largest_component: bool = False, threads: int = 1) -> GlobalStats:
    ds = degree_stats(g)
    diameter, aspl = path_length_stats(g, mode, sources, seed, largest_component, threads)
    sampled = mode == "sampled"
    return GlobalStats(
        nodes=g.n, edges=g.edge_count,
        avg_degree=ds.avg_degree, std_degree=ds.std_degree,
        avg_wdegree=ds.avg_wdegree, std_wdegree=ds.std_wdegree,
        threshold=g.min_weight,
        gcc=global_clustering(g), alcc=avg_local_clustering(g),
        diameter=diameter, aspl=aspl, mode=mode,
        sources=sources if sampled else None, seed=seed if sampled else None,
    )


# -- null models -----------------------------------------------------------

def _decode_pairs(keys: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    return keys // n, keys % n


def gnm(n: int, m: int, seed: int = 0) -> ConceptualSpace:
    """Uniform random simple graph with exactly ``m`` edges, unit weights."""
    total = n * (n - 1) // 2
    if m > total:
        raise ValueError(f"m={m} exceeds the {total} possible edges on {n} nodes")
    rng = np.random.default_rng(seed)
    if 2 * m > total:
        iu, iv = np.triu_indices(n, 1)
        pick = np.sort(rng.choice(total, size=m, replace=False))
        u, v = iu[pick], iv[pick]
    else:
        keys = np.empty(0, np.int64)
        while len(keys) < m:
            need = m - len(keys)
            a = rng.integers(0, n, size=int(need * 1.1) + 16)
            b = rng.integers(0, n, size=len(a))
            ok = a != b
            lo, hi = np.minimum(a[ok], b[ok]), np.maximum(a[ok], b[ok])
            draws = np.concatenate([keys, lo * n + hi])
            # first occurrence in draw order keeps sampling without replacement uniform
            _, first = np.unique(draws, return_index=True)
            keys = draws[np.sort(first)][:m]
        keys = np.sort(keys)
        u, v = _decode_pairs(keys, n)
    return build(n, EdgeArray(u.astype(np.int64), v.astype(np.int64), np.ones(m)))


def is_graphical(degrees: Sequence[int]) -> bool:
    """Erdos-Gallai test, vectorized over k."""
    d = np.sort(np.asarray(degrees, np.int64))[::-1]
    if len(d) == 0:
        return True
    if d[-1] < 0 or d.sum() % 2:
        return False
    n = len(d)
    csum = np.concatenate([[0], np.cumsum(d)])
    k = np.arange(1, n + 1)
    # d is descending: entries >= k occupy a prefix of length p_k
    p = np.searchsorted(-d, -k, side="right")
    split = np.maximum(k, p)
    rhs = k * (k - 1) + k * (split - k) + (csum[n] - csum[split])
    return bool((csum[1:] <= rhs).all())


def configuration_model(degrees: Sequence[int], seed: int = 0, max_rounds: int = 1000) -> ConceptualSpace:
    """Simple graph with the given degree sequence via stub matching.

    Stubs on self-loops or repeated pairs are re-paired together with an
    equal number of randomly chosen good pairs until none remain.
    """
    deg = np.asarray(degrees, np.int64)
    n = len(deg)
    if not is_graphical(deg):
        raise ValueError("degree sequence is not graphical")
    rng = np.random.default_rng(seed)
    stubs = np.repeat(np.arange(n), deg)
    rng.shuffle(stubs)
    a, b = stubs[0::2].copy(), stubs[1::2].copy()
    for _ in range(max_rounds):
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        keys = lo * n + hi
        order = np.argsort(keys, kind="stable")
        dup = np.zeros(len(keys), bool)
        sk = keys[order]
        dup[order[1:]] = sk[1:] == sk[:-1]
        bad = dup | (a == b)
        nbad = int(bad.sum())
        if nbad == 0:
            break
        good = np.flatnonzero(~bad)
        extra = rng.choice(good, size=min(len(good), max(nbad, 1)), replace=False) if len(good) else good
        redo = np.concatenate([np.flatnonzero(bad), extra])
        pool = np.concatenate([a[redo], b[redo]])
        rng.shuffle(pool)
        half = len(redo)
        a[redo], b[redo] = pool[:half], pool[half:]
    else:
        raise RuntimeError(f"could not realize a simple graph within {max_rounds} rounds")
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    order = np.lexsort((hi, lo))
    return build(n, EdgeArray(lo[order], hi[order], np.ones(len(lo))))


def random_baseline(n: int, m: int, model: str = "gnm", seed: int = 0,
                    degrees: Sequence[int] | None = None) -> ConceptualSpace:
    if model == "gnm":
        return gnm(n, m, seed)
    if model == "configuration":
        if degrees is None:
            raise ValueError("configuration model needs a degree sequence")
        if len(degrees) != n or int(np.sum(degrees)) != 2 * m:
            raise ValueError("degree sequence does not match n and m")
        return configuration_model(degrees, seed)
    raise ValueError(f"unknown null model {model!r}")


def baseline_clustering(g: ConceptualSpace, model: str, seeds: Sequence[int]) -> dict:
    """GCC/ALCC of null-model graphs matched to ``g`` (mean over seeds)."""
    gccs, alccs = [], []
    for s in seeds:
        r = random_baseline(g.n, g.edge_count, model, s, degrees=g.degrees)
        gccs.append(global_clustering(r))
        alccs.append(avg_local_clustering(r))
    return {"model": model, "seeds": list(seeds), "gcc": float(np.mean(gccs)),
            "alcc": float(np.mean(alccs)), "gcc_per_seed": gccs, "alcc_per_seed": alccs}


def degree_table(g: ConceptualSpace) -> list[tuple[int, int, float]]:
    return list(zip(range(g.n), g.degrees.tolist(), g.strengths.tolist()))


def histogram(values: np.ndarray, bins: int = 50) -> list[tuple[float, float, int]]:
    counts, edges = np.histogram(values, bins=bins)
    return [(float(edges[i]), float(edges[i + 1]), int(c)) for i, c in enumerate(counts)]

