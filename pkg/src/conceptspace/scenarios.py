"""Local evaluations: semantic groups, relation pairs and a reference concept map."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .embed_io import DEFAULT_MARKER, EmbeddingMatrix, ResolutionError, Vocabulary, display_name, resolve
from .graph import ConceptualSpace, build, component_labels, induced_subgraph
from .paths import METRICS, PairLengths, distance_rows, pair_lengths_from_rows
from .simgraph import EdgeArray, edges_above
from .stattests import CORRELATIONS, TTESTS, TTestResult

log = logging.getLogger(__name__)


def _data_path(name: str):
    return resources.files("conceptspace").joinpath("data", name)


# -- inputs ----------------------------------------------------------------

@dataclass
class GroupSpec:
    name: str
    members: list[str]
    random: bool = False


def load_groups(path: str | Path | None = None) -> list[GroupSpec]:
    """JSON object {name: [surface forms] | null}; null means "sample at random"."""
    text = (_data_path("groups.json").read_text(encoding="utf-8") if path is None
            else Path(path).read_text(encoding="utf-8"))
    raw = json.loads(text)
    if not isinstance(raw, dict):
        raise ValueError("groups file must hold a JSON object")
    return [GroupSpec(name, [], random=True) if members is None else GroupSpec(name, list(members))
            for name, members in raw.items()]


def sample_random_group(vocab: Vocabulary, size: int, seed: int, exclude: set[int] = frozenset()) -> list[int]:
    rng = np.random.default_rng(seed)
    pool = np.setdiff1d(np.arange(len(vocab)), np.fromiter(exclude, np.int64, len(exclude)))
    return sorted(rng.choice(pool, size=min(size, len(pool)), replace=False).tolist())


@dataclass
class ResolvedGroup:
    name: str
    ids: list[int]
    members: list[str]
    dropped: list[str]
    seed: int | None = None


def resolve_groups(vocab: Vocabulary, groups: Sequence[GroupSpec], seed: int = 0,
                   random_size: int = 10, policy: str = "prefer_initial",
                   marker: str = DEFAULT_MARKER) -> list[ResolvedGroup]:
    out, used = [], set()
    pending = []
    for gs in groups:
        if gs.random:
            pending.append(len(out))
            out.append(None)
            continue
        ids, members, dropped = [], [], []
        for s in gs.members:
            try:
                idx = resolve(vocab, s, policy, marker)
            except ResolutionError as exc:
                log.warning("group %s: %s", gs.name, exc)
                dropped.append(s)
                continue
            if idx in ids:
                dropped.append(s)
                continue
            ids.append(idx)
            members.append(s)
        used.update(ids)
        out.append(ResolvedGroup(gs.name, ids, members, dropped))
    for pos in pending:
        gs = groups[pos]
        ids = sample_random_group(vocab, random_size, seed, used)
        out[pos] = ResolvedGroup(gs.name, ids, [display_name(vocab[i], marker) for i in ids], [], seed=seed)
    return out


def relation_types() -> dict[str, str]:
    raw = json.loads(_data_path("relation_types.json").read_text(encoding="utf-8"))
    return {k: v["name"] for k, v in raw.items()}


@dataclass(frozen=True)
class RelationPair:
    head: str
    tail: str
    relation: str


def _canonical_relation(label: str, types: dict[str, str]) -> str:
    label = label.strip()
    if label.upper() in types:
        return label.upper()
    for key, name in types.items():
        if name.lower() == label.lower().replace("_", " "):
            return key
    raise ValueError(f"unknown relation label {label!r}; expected one of {sorted(types)} or their names")


def load_relations(path: str | Path, min_words: int = 0) -> list[RelationPair]:
    """TSV "head<TAB>relation<TAB>tail"; relation is a letter A-H or its name.

    ``min_words`` rejects relations involving fewer distinct words.
    """
    types = relation_types()
    pairs: list[RelationPair] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n\r")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected head<TAB>relation<TAB>tail")
            head, rel, tail = parts
            if head == tail:
                raise ValueError(f"{path}:{lineno}: head and tail are identical ({head!r})")
            pairs.append(RelationPair(head, tail, _canonical_relation(rel, types)))
    if min_words:
        words: dict[str, set[str]] = {}
        for p in pairs:
            words.setdefault(p.relation, set()).update((p.head, p.tail))
        small = {r: len(w) for r, w in words.items() if len(w) < min_words}
        if small:
            raise ValueError(f"relations with fewer than {min_words} words: {small}")
    return pairs


def load_concepts(path: str | Path | None = None) -> list[str]:
    text = (_data_path("smm_concepts.txt").read_text(encoding="utf-8") if path is None
            else Path(path).read_text(encoding="utf-8"))
    return [line.strip() for line in text.splitlines() if line.strip()]


def load_gt_edges(path: str | Path | None = None) -> list[tuple[str, str]]:
    text = (_data_path("smm_gt.tsv").read_text(encoding="utf-8") if path is None
            else Path(path).read_text(encoding="utf-8"))
    edges = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ValueError(f"GT line {lineno}: expected u<TAB>v")
        edges.append((parts[0].strip(), parts[1].strip()))
    return edges


def gt_graph(concepts: Sequence[str], gt_edges: Sequence[tuple[str, str]]) -> ConceptualSpace:
    """Unit-weight graph over ``concepts`` (positions as node ids)."""
    pos = {c: i for i, c in enumerate(concepts)}
    pairs = set()
    for a, b in gt_edges:
        if a not in pos or b not in pos:
            raise ValueError(f"GT edge ({a!r}, {b!r}) uses a concept outside the concept list")
        if a == b:
            raise ValueError(f"GT self-loop on {a!r}")
        pairs.add((min(pos[a], pos[b]), max(pos[a], pos[b])))
    ordered = sorted(pairs)
    return build(len(concepts), EdgeArray.from_edges([(u, v, 1.0) for u, v in ordered]))


# -- scenario 1 ------------------------------------------------------------

@dataclass
class GroupMatrix:
    names: list[str]
    metric: str
    means: np.ndarray
    samples: dict[tuple[int, int], PairLengths]
    groups: list[ResolvedGroup]

    def cell(self, i: int, j: int) -> PairLengths:
        return self.samples[(min(i, j), max(i, j))]

    def to_json(self) -> dict:
        size = len(self.names)
        return {
            "metric": self.metric,
            "groups": [{"name": g.name, "members": g.members, "ids": g.ids, "dropped": g.dropped,
                        "seed": g.seed} for g in self.groups],
            "mean": [[_num(self.means[i, j]) for j in range(size)] for i in range(size)],
            "pairs": [[len(self.cell(i, j).lengths) for j in range(size)] for i in range(size)],
            "unreachable": [[self.cell(i, j).unreachable for j in range(size)] for i in range(size)],
        }


def _num(x: float) -> float | None:
    return None if x is None or (isinstance(x, float) and math.isnan(x)) else float(x)


def scenario_groups(g: ConceptualSpace, groups: Sequence[ResolvedGroup], metric: str = "hop") -> GroupMatrix:
    """Mean shortest-path length within (diagonal) and between semantic groups."""
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    if not groups:
        raise ValueError("need at least one group")
    for grp in groups:
        if len(grp.ids) < 2:
            raise ValueError(f"group {grp.name!r} has {len(grp.ids)} resolvable members; need 2")
    srcs = sorted({i for grp in groups for i in grp.ids})
    dist = distance_rows(g, srcs, metric)
    index = {s: i for i, s in enumerate(srcs)}
    k = len(groups)
    means = np.full((k, k), np.nan)
    samples = {}
    for i in range(k):
        for j in range(i, k):
            cell = pair_lengths_from_rows(dist, index, groups[i].ids, groups[j].ids, within=i == j)
            samples[(i, j)] = cell
            if cell.lengths:
                means[i, j] = means[j, i] = cell.mean
    return GroupMatrix([grp.name for grp in groups], metric, means, samples, list(groups))


@dataclass
class DiffCell:
    diff: float | None
    test: TTestResult | None

    @property
    def stars(self) -> int:
        return self.test.stars if self.test else 0


@dataclass
class DiffMatrix:
    names: list[str]
    cells: list[list[DiffCell]]
    ttest: str

    @property
    def diff(self) -> np.ndarray:
        return np.array([[c.diff if c.diff is not None else np.nan for c in row] for row in self.cells])

    @property
    def stars(self) -> np.ndarray:
        return np.array([[c.stars for c in row] for row in self.cells], dtype=np.int64)

    def to_json(self) -> dict:
        return {
            "ttest": self.ttest,
            "groups": self.names,
            "diff": [[c.diff for c in row] for row in self.cells],
            "stars": self.stars.tolist(),
            "t": [[c.test.t if c.test and math.isfinite(c.test.t) else None for c in row] for row in self.cells],
            "p": [[c.test.p if c.test else None for c in row] for row in self.cells],
        }


def _compare(xs: Sequence[float], ys: Sequence[float], ttest: str) -> DiffCell:
    if not xs or not ys:
        return DiffCell(None, None)
    diff = float(np.mean(ys) - np.mean(xs))
    if len(xs) < 2 or len(ys) < 2:
        return DiffCell(diff, None)
    return DiffCell(diff, TTESTS[ttest](ys, xs))


def diff_heatmap(a: GroupMatrix, b: GroupMatrix, ttest: str = "welch") -> DiffMatrix:
    """Per-cell mean(b) - mean(a) with t-test significance over the two samples."""
    if a.names != b.names:
        raise ValueError(f"group lists differ: {a.names} vs {b.names}")
    k = len(a.names)
    cells = [[_compare(a.cell(i, j).lengths, b.cell(i, j).lengths, ttest) for j in range(k)]
             for i in range(k)]
    return DiffMatrix(list(a.names), cells, ttest)


# -- scenario 2 ------------------------------------------------------------

@dataclass
class RelationStats:
    relation: str
    name: str
    pairs: int
    unresolved: list[tuple[str, str]]
    sample: PairLengths

    @property
    def mean(self) -> float | None:
        return self.sample.mean

    def to_json(self) -> dict:
        return {"relation": self.relation, "name": self.name, "pairs": self.pairs,
                "resolved": self.pairs - len(self.unresolved), "unresolved": len(self.unresolved),
                "reachable": len(self.sample.lengths), "unreachable": self.sample.unreachable,
                "mean": self.mean}


def scenario_relations(g: ConceptualSpace, vocab: Vocabulary, pairs: Sequence[RelationPair],
                       metric: str = "hop", policy: str = "prefer_initial",
                       marker: str = DEFAULT_MARKER) -> dict[str, RelationStats]:
    types = relation_types()
    resolved: dict[str, list[tuple[int, int]]] = {}
    unresolved: dict[str, list[tuple[str, str]]] = {}
    counts: dict[str, int] = {}
    for p in pairs:
        counts[p.relation] = counts.get(p.relation, 0) + 1
        try:
            h = resolve(vocab, p.head, policy, marker)
            t = resolve(vocab, p.tail, policy, marker)
        except ResolutionError:
            unresolved.setdefault(p.relation, []).append((p.head, p.tail))
            continue
        if h == t:
            unresolved.setdefault(p.relation, []).append((p.head, p.tail))
            continue
        resolved.setdefault(p.relation, []).append((h, t))
    srcs = sorted({h for lst in resolved.values() for h, _ in lst})
    dist = distance_rows(g, srcs, metric) if srcs else np.empty((0, g.n))
    index = {s: i for i, s in enumerate(srcs)}
    out = {}
    for rel in sorted(counts):
        lengths, missing = [], 0
        for h, t in resolved.get(rel, []):
            d = float(dist[index[h], t])
            if math.isinf(d):
                missing += 1
            else:
                lengths.append(d)
        out[rel] = RelationStats(rel, types.get(rel, rel), counts[rel], unresolved.get(rel, []),
                                 PairLengths(lengths, missing))
    return out


def compare_relations(a: dict[str, RelationStats], b: dict[str, RelationStats],
                      ttest: str = "welch") -> dict[str, DiffCell]:
    """mean(b) - mean(a) per relation present in both, with significance."""
    return {rel: _compare(a[rel].sample.lengths, b[rel].sample.lengths, ttest)
            for rel in sorted(set(a) & set(b))}


# -- scenario 3 ------------------------------------------------------------

@dataclass
class SpaceSummary:
    nodes: int
    edges: int
    avg_degree: float
    std_degree: float
    avg_wdegree: float | None
    std_wdegree: float | None
    avg_weight: float | None
    component_count: int
    single_count: int

    @classmethod
    def of(cls, g: ConceptualSpace, weighted: bool = True) -> "SpaceSummary":
        deg = g.degrees.astype(np.float64)
        s = g.strengths
        return cls(
            nodes=g.n, edges=g.edge_count,
            avg_degree=float(deg.mean()), std_degree=float(deg.std()),
            avg_wdegree=float(s.mean()) if weighted else None,
            std_wdegree=float(s.std()) if weighted else None,
            avg_weight=(float(g.edges().w.mean()) if g.edge_count else None) if weighted else None,
            component_count=component_labels(g)[0],
            single_count=int((g.degrees == 0).sum()),
        )


@dataclass
class SmmReport:
    concepts: list[str]
    dropped: list[str]
    mode: str
    tau: float | None
    model: SpaceSummary
    gt: SpaceSummary
    degree_correlation: float | None
    correlation_method: str
    recall: float
    precision: float
    overlap: int
    flags: list[str] = field(default_factory=list)
    extra_correlations: dict[str, float | None] = field(default_factory=dict)
    model_edges: list[tuple[str, str, float]] = field(default_factory=list)

    # flat aliases for the headline numbers
    @property
    def component_count(self) -> int:
        return self.model.component_count

    @property
    def single_count(self) -> int:
        return self.model.single_count

    @property
    def edge_count(self) -> int:
        return self.model.edges

    @property
    def avg_weight(self) -> float | None:
        return self.model.avg_weight

    def to_json(self) -> dict:
        from dataclasses import asdict
        return {
            "concepts": self.concepts, "dropped": self.dropped, "mode": self.mode, "tau": self.tau,
            "model": asdict(self.model), "gt": asdict(self.gt),
            "reference": {"correlation": self.degree_correlation, "method": self.correlation_method,
                          "recall": self.recall, "precision": self.precision, "overlap": self.overlap,
                          "other_correlations": self.extra_correlations},
            "flags": self.flags,
            "model_edges": [list(e) for e in self.model_edges],
        }


def compare_to_gt(model: ConceptualSpace, gt: ConceptualSpace, corr: str = "pearson"):
    """(correlation or None, recall, precision, overlap, flags, other correlations)."""
    flags = []
    me, ge = model.edges().pairs(), gt.edges().pairs()
    overlap = len(me & ge)
    if ge:
        recall = overlap / len(ge)
    else:
        recall = 0.0
        flags.append("recall_undefined_empty_gt")
    if me:
        precision = overlap / len(me)
    else:
        precision = 0.0
        flags.append("precision_undefined_empty_model")
    correlations = {}
    for name, fn in CORRELATIONS.items():
        try:
            correlations[name] = fn(model.degrees, gt.degrees)
        except ValueError:
            correlations[name] = None
    if correlations[corr] is None:
        flags.append("correlation_undefined_constant_degrees")
    others = {k: v for k, v in correlations.items() if k != corr}
    return correlations[corr], recall, precision, overlap, flags, others


def scenario_smm(m: EmbeddingMatrix, vocab: Vocabulary, concepts: Sequence[str], tau: float | None,
                 gt_edges: Sequence[tuple[str, str]], mode: str = "threshold",
                 graph: ConceptualSpace | None = None, corr: str = "pearson",
                 policy: str = "prefer_initial", marker: str = DEFAULT_MARKER,
                 cap: int | None = None) -> SmmReport:
    """Compare the concept subgraph of an embedding space with a reference map.

    ``threshold`` mode links every concept pair whose (centered) cosine
    reaches ``tau``; ``induced`` mode takes the induced subgraph of ``graph``.
    """
    if not concepts:
        raise ValueError("empty concept list")
    kept, ids, dropped = [], [], []
    for c in concepts:
        try:
            idx = resolve(vocab, c, policy, marker)
        except ResolutionError:
            dropped.append(c)
            continue
        if idx in ids:
            dropped.append(c)
            continue
        kept.append(c)
        ids.append(idx)
    if dropped:
        log.warning("scenario 3: dropped %d concepts: %s", len(dropped), dropped)
    if len(kept) < 2:
        raise ValueError("fewer than two resolvable concepts")
    keep_set = set(kept)
    gt = gt_graph(kept, [(a, b) for a, b in gt_edges if a in keep_set and b in keep_set])
    if mode == "threshold":
        if tau is None:
            raise ValueError("threshold mode needs tau")
        sub = edges_above(m, tau, rows=ids, cap=cap)
        model = build(len(kept), EdgeArray(np.minimum(sub.u, sub.v), np.maximum(sub.u, sub.v), sub.w)
                      if len(sub) else EdgeArray.empty())
    elif mode == "induced":
        if graph is None:
            raise ValueError("induced mode needs the global graph")
        induced, remap = induced_subgraph(graph, ids)
        # reorder nodes from ascending vocabulary id to concept-list order
        order = [remap[i] for i in ids]
        inv = {old: new for new, old in enumerate(order)}
        e = induced.edges()
        u = np.array([inv[x] for x in e.u.tolist()], np.int64)
        v = np.array([inv[x] for x in e.v.tolist()], np.int64)
        model = build(len(kept), EdgeArray(np.minimum(u, v), np.maximum(u, v), e.w))
    else:
        raise ValueError(f"unknown subgraph mode {mode!r}")
    correlation, recall, precision, overlap, flags, others = compare_to_gt(model, gt, corr)
    me = model.edges()
    return SmmReport(
        concepts=kept, dropped=dropped, mode=mode, tau=tau,
        model=SpaceSummary.of(model), gt=SpaceSummary.of(gt, weighted=False),
        degree_correlation=correlation, correlation_method=corr,
        recall=recall, precision=precision, overlap=overlap, flags=flags,
        extra_correlations=others,
        model_edges=[(kept[a], kept[b], w) for a, b, w in me],
    )
