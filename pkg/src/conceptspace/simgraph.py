"""Cosine similarity and exact global top-K edge selection over all pairs.

The complete similarity graph is never materialized. Row blocks of the
upper triangle are computed with one matrix product each, and only
candidates that can still reach the final selection are kept.

Block products (BLAS) may round differently depending on the block shape
or thread count, so every surviving candidate is re-scored with the
canonical per-pair routine used by :func:`cosine`. Candidates are kept
within ``_MARGIN`` of the running cutoff, which is far wider than the
rounding gap between the two routes; the final ranking is therefore
exact with respect to the canonical weights and independent of blocking.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .embed_io import EmbeddingMatrix

log = logging.getLogger(__name__)

PAIR_CONVENTIONS = ("half_off_diagonal", "half_square")
ZERO_NORM = 1e-12
DEFAULT_EDGE_CAP = 20_000_000
_MARGIN = 1e-9
_FLOOR = -2.0  # below any cosine, above the -inf diagonal fill
_PAIR_CHUNK_VALUES = 1 << 23


class EdgeCapExceeded(RuntimeError):
    pass


class WeightedEdge(NamedTuple):
    u: int
    v: int
    w: float


@dataclass(frozen=True, eq=False)
class EdgeArray:
    """Columnar edge list; ``u < v`` for every row."""

    u: np.ndarray
    v: np.ndarray
    w: np.ndarray

    @classmethod
    def empty(cls) -> "EdgeArray":
        return cls(np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0, np.float64))

    @classmethod
    def from_edges(cls, edges: Sequence[tuple[int, int, float]]) -> "EdgeArray":
        if not len(edges):
            return cls.empty()
        u, v, w = zip(*edges)
        return cls(np.asarray(u, np.int64), np.asarray(v, np.int64), np.asarray(w, np.float64))

    def __len__(self) -> int:
        return len(self.u)

    def __iter__(self) -> Iterator[WeightedEdge]:
        for u, v, w in zip(self.u.tolist(), self.v.tolist(), self.w.tolist()):
            yield WeightedEdge(u, v, w)

    def __getitem__(self, i) -> "WeightedEdge | EdgeArray":
        if isinstance(i, (int, np.integer)):
            return WeightedEdge(int(self.u[i]), int(self.v[i]), float(self.w[i]))
        return EdgeArray(self.u[i], self.v[i], self.w[i])

    def pairs(self) -> set[tuple[int, int]]:
        return set(zip(self.u.tolist(), self.v.tolist()))

    def sorted(self) -> "EdgeArray":
        """Deterministic order: weight descending, then u, then v ascending."""
        order = np.lexsort((self.v, self.u, -self.w))
        return self[order]


@dataclass(frozen=True, eq=False)
class TopKSelection:
    edges: EdgeArray
    k_ratio: float
    pair_convention: str
    threshold: float

    @property
    def count(self) -> int:
        return len(self.edges)


def pair_count(n: int, pair_convention: str = "half_off_diagonal") -> Fraction:
    """Denominator P of the K ratio.

    ``half_off_diagonal`` is the true number of unordered pairs n(n-1)/2;
    ``half_square`` is n^2/2, the convention that reproduces 1,024,000 edges
    for n = 32000 at K = 0.002.
    """
    if pair_convention == "half_off_diagonal":
        return Fraction(n * (n - 1), 2)
    if pair_convention == "half_square":
        return Fraction(n * n, 2)
    raise ValueError(f"unknown pair convention {pair_convention!r}; choose from {PAIR_CONVENTIONS}")


def edge_count_for_ratio(n: int, k_ratio: float, pair_convention: str = "half_off_diagonal") -> int:
    """ceil(k_ratio * P), with k_ratio taken at its shortest decimal repr."""
    if not 0 < k_ratio <= 1:
        raise ValueError(f"k_ratio must lie in (0, 1], got {k_ratio}")
    count = math.ceil(Fraction(repr(float(k_ratio))) * pair_count(n, pair_convention))
    if count > n * (n - 1) // 2:
        raise ValueError(
            f"k_ratio={k_ratio} under {pair_convention} requests {count} edges, "
            f"but only {n * (n - 1) // 2} pairs exist"
        )
    return count


# -- canonical per-pair similarity ----------------------------------------

def _norms(m: EmbeddingMatrix) -> np.ndarray:
    cached = getattr(m, "_norms_cache", None)
    if cached is None:
        data = m.data
        cached = np.empty(m.rows)
        step = max(1, _PAIR_CHUNK_VALUES // m.dims)
        for a in range(0, m.rows, step):
            block = data[a:a + step].astype(np.float64)
            cached[a:a + step] = np.sqrt(np.sum(block * block, axis=1))
        zero = int((cached < ZERO_NORM).sum())
        if zero:
            log.warning("%d zero-norm row(s); their similarity to every row is 0", zero)
        cached.flags.writeable = False
        object.__setattr__(m, "_norms_cache", cached)
    return cached


def pair_cosines(m: EmbeddingMatrix, us: np.ndarray, vs: np.ndarray) -> np.ndarray:
    """Canonical cosine for each (us[i], vs[i]); symmetric bit-for-bit."""
    us = np.asarray(us, np.int64)
    vs = np.asarray(vs, np.int64)
    norms = _norms(m)
    out = np.empty(len(us))
    step = max(1, _PAIR_CHUNK_VALUES // m.dims)
    data = m.data
    for a in range(0, len(us), step):
        iu, iv = us[a:a + step], vs[a:a + step]
        dots = np.sum(data[iu].astype(np.float64) * data[iv].astype(np.float64), axis=1)
        denom = norms[iu] * norms[iv]
        zero = (norms[iu] < ZERO_NORM) | (norms[iv] < ZERO_NORM)
        out[a:a + step] = np.where(zero, 0.0, dots / np.where(zero, 1.0, denom))
    return out


def cosine(m: EmbeddingMatrix, i: int, j: int) -> float:
    if i == j:
        raise ValueError("self-similarity is excluded from the graph")
    if not (0 <= i < m.rows and 0 <= j < m.rows):
        raise IndexError(f"row ids ({i}, {j}) out of range for {m.rows} rows")
    norms = _norms(m)
    if norms[i] < ZERO_NORM or norms[j] < ZERO_NORM:
        log.warning("zero-norm row in cosine(%d, %d); returning 0", i, j)
    return float(pair_cosines(m, np.array([i]), np.array([j]))[0])


# -- blocked upper-triangle scan ------------------------------------------

def _require_centered(m: EmbeddingMatrix) -> None:
    if not m.centered:
        raise ValueError("similarity ranking expects a centered matrix; call center() first")


def _iter_blocks(m: EmbeddingMatrix, rows: np.ndarray | None, block_rows: int):
    """Yield ``(a, sims)`` where ``sims[r, c]`` scores pair (a + r, a + c).

    Positions refer to ``rows`` when given. Entries on or below the
    diagonal are -inf.
    """
    norms = _norms(m)
    ids = np.arange(m.rows) if rows is None else np.asarray(rows, np.int64)
    inv = np.where(norms[ids] < ZERO_NORM, 0.0, 1.0 / np.maximum(norms[ids], ZERO_NORM))
    n = len(ids)
    data = m.data if rows is None else m.data[ids]
    data = data.astype(np.float64, copy=False)
    for a in range(0, n - 1, block_rows):
        b = min(a + block_rows, n)
        sims = data[a:b] @ data[a:].T
        sims *= inv[a:b, None]
        sims *= inv[None, a:]
        r, c = np.tril_indices(b - a)
        sims[r, c] = -np.inf
        yield a, sims


class _Pool:
    """Candidate edges as parallel chunks of (u, v, approximate w)."""

    def __init__(self):
        self.u: list[np.ndarray] = []
        self.v: list[np.ndarray] = []
        self.w: list[np.ndarray] = []
        self.size = 0

    def add(self, u, v, w):
        if len(u):
            self.u.append(u)
            self.v.append(v)
            self.w.append(w)
            self.size += len(u)

    def arrays(self):
        if not self.u:
            return np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0)
        u, v, w = np.concatenate(self.u), np.concatenate(self.v), np.concatenate(self.w)
        self.u, self.v, self.w = [u], [v], [w]
        return u, v, w

    def keep(self, mask):
        u, v, w = self.arrays()
        self.u, self.v, self.w = [u[mask]], [v[mask]], [w[mask]]
        self.size = int(mask.sum())


def _kth_largest(values: np.ndarray, k: int) -> float:
    return float(np.partition(values, len(values) - k)[len(values) - k])


def top_edges(m: EmbeddingMatrix, count: int, block_rows: int = 1024) -> EdgeArray:
    """The ``count`` most similar pairs, ordered by (w desc, u asc, v asc)."""
    _require_centered(m)
    n = m.rows
    total = n * (n - 1) // 2
    if count < 1 or count > total:
        raise ValueError(f"requested {count} edges; must lie in [1, {total}]")
    pool = _Pool()
    cutoff = -np.inf  # count pool entries are known to be >= cutoff (approx)
    for a, sims in _iter_blocks(m, None, block_rows):
        floor = cutoff
        if sims.size > count:
            floor = max(floor, _kth_largest(sims.ravel(), count))
        r, c = np.nonzero(sims >= max(floor - _MARGIN, _FLOOR))
        pool.add(r + a, c + a, sims[r, c])
        del sims
        if pool.size >= 2 * count + block_rows:
            _, _, w = pool.arrays()
            cutoff = _kth_largest(w, count)
            pool.keep(w >= cutoff - _MARGIN)
    u, v, _ = pool.arrays()
    w = pair_cosines(m, u, v)
    order = np.lexsort((v, u, -w))[:count]
    return EdgeArray(u[order], v[order], w[order])


def top_k_edges(m: EmbeddingMatrix, k_ratio: float, pair_convention: str = "half_off_diagonal",
                block_rows: int = 1024) -> TopKSelection:
    count = edge_count_for_ratio(m.rows, k_ratio, pair_convention)
    edges = top_edges(m, count, block_rows=block_rows)
    return TopKSelection(edges, float(k_ratio), pair_convention, float(edges.w[-1]))


def _collect_above(m: EmbeddingMatrix, tau: float, rows, block_rows: int, cap: int | None):
    """Approximate candidates >= tau - margin, then exact rescoring."""
    _require_centered(m)
    ids = np.arange(m.rows) if rows is None else np.asarray(rows, np.int64)
    pool = _Pool()
    for a, sims in _iter_blocks(m, rows, block_rows):
        r, c = np.nonzero(sims >= max(tau - _MARGIN, _FLOOR))
        pool.add(r + a, c + a, sims[r, c])
        if cap is not None and pool.size > cap + 10_000:
            raise EdgeCapExceeded(f"more than {cap} pairs reach tau={tau}")
    u, v, _ = pool.arrays()
    w = pair_cosines(m, ids[u], ids[v])
    keep = w >= tau
    if cap is not None and int(keep.sum()) > cap:
        raise EdgeCapExceeded(f"{int(keep.sum())} pairs reach tau={tau}, cap is {cap}")
    return u[keep], v[keep], w[keep]


def count_above(m: EmbeddingMatrix, tau: float, rows: Sequence[int] | None = None,
                block_rows: int = 1024) -> int:
    """Number of pairs i < j with cosine >= tau."""
    _require_centered(m)
    ids = np.arange(m.rows) if rows is None else np.asarray(rows, np.int64)
    total = 0
    for a, sims in _iter_blocks(m, rows, block_rows):
        lo = max(tau - _MARGIN, _FLOOR)
        total += int(np.count_nonzero(sims >= max(tau + _MARGIN, _FLOOR)))
        r, c = np.nonzero((sims >= lo) & (sims < tau + _MARGIN))
        if len(r):
            total += int(np.count_nonzero(pair_cosines(m, ids[r + a], ids[c + a]) >= tau))
    return total


def edges_above(m: EmbeddingMatrix, tau: float, rows: Sequence[int] | None = None,
                block_rows: int = 1024, cap: int | None = DEFAULT_EDGE_CAP) -> EdgeArray:
    """All pairs with cosine >= tau in deterministic order.

    With ``rows`` given, only pairs within that subset are considered and
    endpoints are positions into ``rows``.
    """
    u, v, w = _collect_above(m, tau, rows, block_rows, cap)
    return EdgeArray(u, v, w).sorted()


# -- export ----------------------------------------------------------------

def write_edges_csv(edges: EdgeArray, path: str | Path, header: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if header is not None:
            fh.write(header + "\n")
        for u, v, w in zip(edges.u.tolist(), edges.v.tolist(), edges.w.tolist()):
            fh.write(f"{u},{v},{w:.6g}\n")


def read_edges_csv(path: str | Path) -> tuple[EdgeArray, list[str]]:
    """Parse "u,v,w" lines; returns the edges and any '#' comment lines."""
    comments: list[str] = []
    us, vs, ws = [], [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                comments.append(line)
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 'u,v,w', got {line!r}")
            us.append(int(parts[0]))
            vs.append(int(parts[1]))
            ws.append(float(parts[2]))
    return EdgeArray(np.asarray(us, np.int64), np.asarray(vs, np.int64),
                     np.asarray(ws, np.float64)), comments
