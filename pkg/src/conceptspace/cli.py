"""Command-line entry point: ``conceptspace <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path
import numpy as np

from . import __version__
from .embed_io import DEFAULT_MARKER, FORMATS, center, load_embeddings, load_vocab, resolve
from .export import dumps, heatmap_csv, heatmap_svg, read_heatmap_csv
from .graph import (ConceptualSpace, build, common_k, component_labels, load_graph, minimal_connecting_k,
                    node_labels, save_graph, sweep_k, write_dot, write_graphml)
from .netstats import baseline_clustering, global_stats
from .paths import k_shortest_paths, shortest_path, write_paths_dot
from .scenarios import (compare_relations, diff_heatmap, load_concepts, load_groups, load_gt_edges,
                        load_relations, resolve_groups, scenario_groups, scenario_relations,
                        scenario_smm)
from .simgraph import top_k_edges

log = logging.getLogger("conceptspace")

PAIR_CONVENTIONS = {"off-diagonal": "half_off_diagonal", "square": "half_square"}
METRIC_FLAGS = {"hop": "hop", "one-minus-w": "one_minus_w", "inverse-w": "inverse_w"}


class Outputs:
    """Output directory guard: refuses to overwrite unless ``force``."""

    def __init__(self, root: str | Path, force: bool):
        self.root = Path(root)
        self.force = force
        self.root.mkdir(parents=True, exist_ok=True)
        self.written: list[str] = []

    def path(self, name: str) -> Path:
        p = self.root / name
        if p.exists() and not self.force:
            raise FileExistsError(f"{p} exists; pass --force to overwrite")
        self.written.append(name)
        return p

    def text(self, name: str, content: str) -> Path:
        p = self.path(name)
        p.write_bytes(content.encode("utf-8"))
        return p

    def json(self, name: str, doc: dict) -> Path:
        return self.text(name, dumps(doc))


def provenance(args: argparse.Namespace) -> dict:
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}
    return {"tool": "conceptspace", "version": __version__, "command": args.command, "config": config}


# -- shared loading --------------------------------------------------------

def _labels(args, count: int) -> list[str]:
    labels = list(args.label or [])
    labels += [f"model{i}" for i in range(len(labels), count)]
    return labels[:count]


def _load_matrix(path: str, args):
    m = load_embeddings(path, args.format)
    log.info("loaded %s: %d x %d", path, m.rows, m.dims)
    return center(m)


def _load_vocab(args, n: int | None = None):
    if not args.vocab:
        return None
    return load_vocab(args.vocab, expected=n)


def _select(m, args) -> tuple[ConceptualSpace, dict]:
    conv = PAIR_CONVENTIONS[args.pair_convention]
    if args.auto_k:
        mk = minimal_connecting_k(m, resolution=2, pair_convention=conv, block_rows=args.block_rows)
        g = build(m.rows, mk.edges)
        info = {"k": mk.k, "auto_k": True, "rank": mk.rank, "threshold": mk.threshold}
    else:
        sel = top_k_edges(m, args.k, conv, block_rows=args.block_rows)
        g = build(m.rows, sel.edges)
        info = {"k": sel.k_ratio, "auto_k": False, "rank": sel.count, "threshold": sel.threshold}
    info.update({"pair_convention": args.pair_convention, "nodes": g.n, "edges": g.edge_count})
    return g, info


def _graphs(args) -> list[tuple[ConceptualSpace, dict]]:
    out = []
    if getattr(args, "graph", None):
        for path in args.graph:
            g = load_graph(path)
            out.append((g, {"source": path, "nodes": g.n, "edges": g.edge_count, "threshold": g.min_weight}))
    elif getattr(args, "embeddings", None):
        for path in args.embeddings:
            if args.k is None and not args.auto_k:
                raise ValueError("building a graph from embeddings needs --k or --auto-k")
            g, info = _select(_load_matrix(path, args), args)
            info["source"] = path
            out.append((g, info))
    else:
        raise ValueError("pass --graph or --embeddings")
    return out


# -- commands --------------------------------------------------------------

def cmd_sweep(args, out: Outputs) -> None:
    conv = PAIR_CONVENTIONS[args.pair_convention]
    labels = _labels(args, len(args.embeddings))
    rows = ["model,k,edges,components,log10_components"]
    models = []
    for label, path in zip(labels, args.embeddings):
        m = _load_matrix(path, args)
        mk = minimal_connecting_k(m, resolution=args.resolution, pair_convention=conv,
                                  block_rows=args.block_rows)
        curve = mk.sweep
        if args.k_grid:
            grid = sorted(float(x) for x in args.k_grid.split(","))
            curve = sweep_k(m, grid, conv, block_rows=args.block_rows)
        for r in curve.rows():
            rows.append(f"{label},{r['k']!r},{r['edges']},{r['components']},{r['log10_components']!r}")
        models.append({"label": label, "embeddings": path, "minimal_rank": mk.rank,
                       "minimal_k": mk.k, "minimal_k_fraction": f"{mk.k_ratio.numerator}/{mk.k_ratio.denominator}",
                       "threshold_at_minimal": mk.threshold, "grid_minimal_k": curve.minimal_k})
    report = {"provenance": provenance(args), "pair_convention": args.pair_convention, "models": models}
    if len(models) > 1:
        report["common_k"] = common_k([Fraction(m["minimal_k_fraction"]) for m in models], args.precision)
        report["common_k_precision"] = args.precision
    out.text("sweep.csv", "\n".join(rows) + "\n")
    out.json("sweep.json", report)


def cmd_build(args, out: Outputs) -> None:
    (g, info), = _graphs(args)
    vocab = _load_vocab(args, g.n)
    save_graph(g, out.path("graph.csv"))
    if args.graphml:
        write_graphml(g, out.path("graph.graphml"), vocab, args.marker)
    if args.dot:
        write_dot(g, out.path("graph.dot"), vocab, args.marker)
    out.json("build.json", {"provenance": provenance(args), "graph": info})


def cmd_stats(args, out: Outputs) -> None:
    (g, info), = _graphs(args)
    vocab = _load_vocab(args, g.n)
    st = global_stats(g, mode=args.mode, sources=args.sources, seed=args.seed,
                      largest_component=args.largest_component, threads=args.threads)
    doc = {"provenance": provenance(args), "graph": info, **st.to_json()}
    baselines = []
    models = {"none": [], "gnm": ["gnm"], "configuration": ["configuration"],
              "both": ["gnm", "configuration"]}[args.baseline]
    seeds = list(range(args.seed, args.seed + args.baseline_seeds))
    for model in models:
        baselines.append(baseline_clustering(g, model, seeds))
    doc["baselines"] = baselines
    doc["components"] = component_labels(g)[0]
    out.json("stats.json", doc)
    lines = ["node,token,degree,strength"]
    names = node_labels(g.n, vocab, args.marker)
    for i, (d, s) in enumerate(zip(g.degrees.tolist(), g.strengths.tolist())):
        lines.append(f"{i},{_csv_cell(names[i])},{d},{s:.6g}")
    out.text("degrees.csv", "\n".join(lines) + "\n")


def _g(x: float | None) -> str:
    return "" if x is None else f"{x:.6g}"


def _csv_cell(s: str) -> str:
    if any(c in s for c in ',"\n\r'):
        return '"' + s.replace('"', '""') + '"'
    return s


def _endpoints(args, g: ConceptualSpace):
    vocab = _load_vocab(args, g.n)
    if vocab is None:
        return vocab, int(args.source), int(args.target)
    return (vocab, resolve(vocab, args.source, args.policy, args.marker),
            resolve(vocab, args.target, args.policy, args.marker))


def cmd_paths(args, out: Outputs) -> None:
    (g, info), = _graphs(args)
    vocab, u, v = _endpoints(args, g)
    p = shortest_path(g, u, v, METRIC_FLAGS[args.metric])
    out.json("path.json", {"provenance": provenance(args), "graph": info,
                           "source": args.source, "target": args.target,
                           "paths": [p.to_json(vocab, args.marker)]})


def cmd_kpaths(args, out: Outputs) -> None:
    (g, info), = _graphs(args)
    vocab, u, v = _endpoints(args, g)
    paths = k_shortest_paths(g, u, v, args.num_paths, METRIC_FLAGS[args.metric])
    out.json("kpaths.json", {"provenance": provenance(args), "graph": info,
                             "source": args.source, "target": args.target,
                             "paths": [p.to_json(vocab, args.marker) for p in paths]})
    write_paths_dot(g, paths, out.path("kpaths.dot"), vocab, args.marker)


def cmd_scenario1(args, out: Outputs) -> None:
    graphs = _graphs(args)
    labels = _labels(args, len(graphs))
    metric = METRIC_FLAGS[args.metric]
    specs = load_groups(args.groups)
    results, doc = [], {"provenance": provenance(args), "models": []}
    for label, (g, info) in zip(labels, graphs):
        vocab = load_vocab(args.vocab, expected=g.n)
        groups = resolve_groups(vocab, specs, seed=args.seed, random_size=args.random_size,
                                policy=args.policy, marker=args.marker)
        gm = scenario_groups(g, groups, metric)
        results.append(gm)
        doc["models"].append({"label": label, "graph": info, **gm.to_json()})
        out.text(f"scenario1_{label}.csv", heatmap_csv(gm.means, gm.names))
        out.text(f"scenario1_{label}.svg", heatmap_svg(gm.means, gm.names, title=f"{label} ({metric})"))
    if len(results) == 2:
        dm = diff_heatmap(results[0], results[1], args.ttest)
        doc["difference"] = {"minuend": labels[1], "subtrahend": labels[0], **dm.to_json()}
        out.text("scenario1_diff.csv", heatmap_csv(dm.diff, dm.names))
        out.text("scenario1_stars.csv", heatmap_csv(dm.stars, dm.names))
        out.text("scenario1_diff.svg", heatmap_svg(dm.diff, dm.names, stars=dm.stars,
                                                   title=f"{labels[1]} minus {labels[0]}", diverging=True))
    out.json("scenario1.json", doc)


def cmd_scenario2(args, out: Outputs) -> None:
    graphs = _graphs(args)
    labels = _labels(args, len(graphs))
    metric = METRIC_FLAGS[args.metric]
    pairs = load_relations(args.relations, min_words=args.min_words)
    reports, doc = [], {"provenance": provenance(args), "models": []}
    for label, (g, info) in zip(labels, graphs):
        vocab = load_vocab(args.vocab, expected=g.n)
        rep = scenario_relations(g, vocab, pairs, metric, args.policy, args.marker)
        reports.append(rep)
        doc["models"].append({"label": label, "graph": info, "metric": metric,
                              "relations": [r.to_json() for r in rep.values()]})
    header = ["relation", "name"] + [f"mean_{lab}" for lab in labels]
    cmp = {}
    if len(reports) == 2:
        cmp = compare_relations(reports[0], reports[1], args.ttest)
        doc["difference"] = {
            "minuend": labels[1], "subtrahend": labels[0], "ttest": args.ttest,
            "relations": [{"relation": r, "diff": c.diff, "stars": c.stars,
                           "t": c.test.t if c.test else None,
                           "p": c.test.p if c.test else None} for r, c in cmp.items()],
        }
        header += ["diff", "stars"]
    lines = [",".join(header)]
    for r in sorted(set().union(*reports)):
        name = next(rep[r].name for rep in reports if r in rep)
        row = [r, _csv_cell(name)]
        row += [_g(rep[r].mean) if r in rep else "" for rep in reports]
        if len(reports) == 2:
            c = cmp.get(r)
            row += [_g(c.diff) if c else "", str(c.stars) if c else "0"]
        lines.append(",".join(row))
    out.text("scenario2.csv", "\n".join(lines) + "\n")
    out.json("scenario2.json", doc)


def cmd_scenario3(args, out: Outputs) -> None:
    """Threshold mode uses --tau, else the threshold of the top-K graph;
    induced mode uses --graph, else builds the top-K graph."""
    if not args.embeddings:
        raise ValueError("scenario3 needs --embeddings")
    concepts = load_concepts(args.concepts)
    gt_edges = load_gt_edges(args.gt)
    labels = _labels(args, len(args.embeddings))
    graphs = [load_graph(p) for p in args.graph] if args.graph else [None] * len(args.embeddings)
    if len(graphs) != len(args.embeddings):
        raise ValueError("pass one --graph per --embeddings")
    doc = {"provenance": provenance(args), "models": []}
    for label, path, graph in zip(labels, args.embeddings, graphs):
        m = _load_matrix(path, args)
        vocab = load_vocab(args.vocab, expected=m.rows)
        tau, info = args.tau, None
        need_graph = args.subgraph_mode == "induced" and graph is None
        if need_graph or (args.subgraph_mode == "threshold" and tau is None):
            if args.k is None and not args.auto_k:
                raise ValueError("scenario3 needs --tau or --graph, or --k/--auto-k to derive them")
            built, info = _select(m, args)
            graph = graph or built
            tau = info["threshold"] if tau is None and args.subgraph_mode == "threshold" else tau
        rep = scenario_smm(m, vocab, concepts, tau, gt_edges, mode=args.subgraph_mode, graph=graph,
                           corr=args.corr, policy=args.policy, marker=args.marker)
        entry = {"label": label, "embeddings": path, **rep.to_json()}
        if info:
            entry["global_graph"] = info
        doc["models"].append(entry)
    out.json("scenario3.json", doc)


def cmd_export(args, out: Outputs) -> None:
    if args.matrix:
        rows, cols, matrix = read_heatmap_csv(args.matrix)
        stars = None
        if args.stars:
            _, _, s = read_heatmap_csv(args.stars)
            stars = [[int(x or 0) for x in r] for r in s]
        stem = Path(args.matrix).stem
        out.text(f"{stem}.csv", heatmap_csv(matrix, rows, cols))
        out.text(f"{stem}.svg", heatmap_svg(matrix, rows, cols, stars, title=stem,
                                            diverging=args.diverging))
        return
    if not args.graph:
        raise ValueError("export needs --graph or --matrix")
    g = load_graph(args.graph[0])
    vocab = _load_vocab(args, g.n)
    if args.to == "graphml":
        write_graphml(g, out.path("graph.graphml"), vocab, args.marker)
    elif args.to == "dot":
        write_dot(g, out.path("graph.dot"), vocab, args.marker)
    else:
        save_graph(g, out.path("graph.csv"))


# -- parser ----------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", required=True, help="output directory (created if absent)")
    p.add_argument("--force", action="store_true", help="overwrite existing output files")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1, help="upper bound on internal parallelism")
    p.add_argument("--marker", default=DEFAULT_MARKER, help="word-initial token marker")
    p.add_argument("--policy", choices=("prefer_initial", "exact"), default="prefer_initial")
    p.add_argument("--label", action="append", help="model label (repeat per model)")
    p.add_argument("--log-level", default="WARNING")


def _embedding_opts(p: argparse.ArgumentParser, graph: bool = True) -> None:
    p.add_argument("--embeddings", action="append", help="embedding file (repeat for two models)")
    p.add_argument("--format", choices=FORMATS, default="npy")
    p.add_argument("--vocab", help="vocabulary file, one escaped token per line")
    p.add_argument("--pair-convention", choices=sorted(PAIR_CONVENTIONS), default="off-diagonal")
    k = p.add_mutually_exclusive_group()
    k.add_argument("--k", type=float, help="top-K edge ratio")
    k.add_argument("--auto-k", action="store_true", help="use the exact minimal connecting K")
    p.add_argument("--block-rows", type=int, default=1024)
    if graph:
        p.add_argument("--graph", action="append", help="saved graph CSV (repeat for two models)")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="conceptspace", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="connected components versus K; exact minimal K")
    _common(p)
    _embedding_opts(p, graph=False)
    p.add_argument("--k-grid", help="comma-separated K values for the curve")
    p.add_argument("--resolution", type=int, default=20, help="curve points when no grid is given")
    p.add_argument("--precision", type=int, default=3, help="decimals for the common K")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("build", help="select edges and write the graph")
    _common(p)
    _embedding_opts(p, graph=False)
    p.add_argument("--graphml", action="store_true")
    p.add_argument("--dot", action="store_true")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("stats", help="global network statistics")
    _common(p)
    _embedding_opts(p)
    p.add_argument("--mode", choices=("exact", "sampled"), default="exact")
    p.add_argument("--sources", type=int, help="source count in sampled mode")
    p.add_argument("--largest-component", action="store_true")
    p.add_argument("--baseline", choices=("none", "gnm", "configuration", "both"), default="none")
    p.add_argument("--baseline-seeds", type=int, default=1)
    p.set_defaults(func=cmd_stats)

    for name, func, default_metric in (("paths", cmd_paths, "one-minus-w"),
                                       ("kpaths", cmd_kpaths, "one-minus-w")):
        p = sub.add_parser(name, help="shortest path" if name == "paths" else "k shortest simple paths")
        _common(p)
        _embedding_opts(p)
        p.add_argument("--source", required=True, help="surface form, or node id without --vocab")
        p.add_argument("--target", required=True)
        p.add_argument("--metric", choices=sorted(METRIC_FLAGS), default=default_metric)
        if name == "kpaths":
            p.add_argument("--num-paths", type=int, default=6)
        p.set_defaults(func=func)

    p = sub.add_parser("scenario1", help="path lengths within and between semantic groups")
    _common(p)
    _embedding_opts(p)
    p.add_argument("--groups", help="groups JSON (default: bundled ten-group fixture)")
    p.add_argument("--metric", choices=sorted(METRIC_FLAGS), default="hop")
    p.add_argument("--ttest", choices=("welch", "student"), default="welch")
    p.add_argument("--random-size", type=int, default=10)
    p.set_defaults(func=cmd_scenario1)

    p = sub.add_parser("scenario2", help="path lengths of relation pairs")
    _common(p)
    _embedding_opts(p)
    p.add_argument("--relations", required=True, help="TSV head<TAB>relation<TAB>tail")
    p.add_argument("--metric", choices=sorted(METRIC_FLAGS), default="hop")
    p.add_argument("--ttest", choices=("welch", "student"), default="welch")
    p.add_argument("--min-words", type=int, default=10, help="minimum distinct words per relation (0 = off)")
    p.set_defaults(func=cmd_scenario2)

    p = sub.add_parser("scenario3", help="concept subgraph versus a reference map")
    _common(p)
    _embedding_opts(p)
    p.add_argument("--concepts", help="concept list (default: bundled 75-concept fixture)")
    p.add_argument("--gt", help="reference edges TSV u<TAB>v (default: bundled fixture)")
    p.add_argument("--tau", type=float, help="similarity threshold (default: the global graph's)")
    p.add_argument("--subgraph-mode", choices=("threshold", "induced"), default="threshold")
    p.add_argument("--corr", choices=("pearson", "spearman"), default="pearson")
    p.set_defaults(func=cmd_scenario3)

    p = sub.add_parser("export", help="graph interchange formats or heatmap SVG")
    _common(p)
    p.add_argument("--graph", action="append")
    p.add_argument("--vocab")
    p.add_argument("--to", choices=("graphml", "dot", "csv"), default="graphml")
    p.add_argument("--matrix", help="heatmap CSV to render")
    p.add_argument("--stars", help="star-count CSV aligned with --matrix")
    p.add_argument("--diverging", action="store_true")
    p.set_defaults(func=cmd_export)
    return parser


def run(argv: list[str] | None = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        from threadpoolctl import threadpool_limits

        out = Outputs(args.out, args.force)
        with threadpool_limits(limits=max(1, args.threads)):
            args.func(args, out)
    except Exception as exc:  # reported as machine-readable JSON
        err = {"error": type(exc).__name__, "message": str(exc), "command": args.command}
        sys.stderr.write(json.dumps(err) + "\n")
        log.debug("failure", exc_info=True)
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
