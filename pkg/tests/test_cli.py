import json
import subprocess
import sys
from fractions import Fraction

import pytest

from conceptspace import __version__
from conceptspace.cli import run
from conceptspace.embed_io import center, load_embeddings
from conceptspace.export import read_heatmap_csv
from conceptspace.graph import common_k, load_graph, minimal_connecting_k


def ok(*argv):
    assert run([str(a) for a in argv]) == 0


def built(ws, k=0.05, name="g"):
    out = ws / name
    ok("build", "--embeddings", ws / "a.npy", "--k", k, "--out", out)
    return out


def test_version():
    r = subprocess.run([sys.executable, "-m", "conceptspace", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip() == __version__


def test_sweep_single_model(workspace):
    ok("sweep", "--embeddings", workspace / "a.npy", "--out", workspace / "s")
    doc = json.loads((workspace / "s" / "sweep.json").read_text())
    assert "common_k" not in doc
    (model,) = doc["models"]
    mk = minimal_connecting_k(center(load_embeddings(workspace / "a.npy")))
    assert model["minimal_rank"] == mk.rank and Fraction(model["minimal_k_fraction"]) == mk.k_ratio
    lines = (workspace / "s" / "sweep.csv").read_text().splitlines()
    assert lines[0] == "model,k,edges,components,log10_components" and len(lines) > 2
    assert doc["provenance"]["command"] == "sweep" and doc["provenance"]["version"] == __version__


def test_sweep_identical_models_common_k(workspace):
    a = workspace / "a.npy"
    ok("sweep", "--embeddings", a, "--embeddings", a, "--label", "x", "--label", "y",
       "--k-grid", "0.01,0.05,0.2", "--out", workspace / "s")
    doc = json.loads((workspace / "s" / "sweep.json").read_text())
    ks = [Fraction(m["minimal_k_fraction"]) for m in doc["models"]]
    assert ks[0] == ks[1]
    assert doc["common_k"] == common_k([ks[0]]) >= float(ks[0])
    rows = (workspace / "s" / "sweep.csv").read_text().splitlines()[1:]
    assert [r.split(",")[0] for r in rows] == ["x"] * 3 + ["y"] * 3


def test_k_and_auto_k_are_exclusive(workspace, capsys):
    with pytest.raises(SystemExit):
        run(["build", "--embeddings", str(workspace / "a.npy"), "--k", "0.1", "--auto-k",
             "--out", str(workspace / "o")])
    assert "not allowed" in capsys.readouterr().err


def test_errors_are_json(workspace, capsys):
    code = run(["build", "--embeddings", str(workspace / "missing.npy"), "--k", "0.1",
                "--out", str(workspace / "o")])
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert code == 1 and err["command"] == "build" and err["error"] and err["message"]
    assert run(["build", "--embeddings", str(workspace / "a.npy"), "--out", str(workspace / "o")]) == 1
    assert "needs --k" in json.loads(capsys.readouterr().err.strip())["message"]


def test_force_is_required_to_overwrite(workspace, capsys):
    out = built(workspace)
    before = (out / "graph.csv").read_bytes()
    assert run(["build", "--embeddings", str(workspace / "a.npy"), "--k", "0.1", "--out", str(out)]) == 1
    assert json.loads(capsys.readouterr().err)["error"] == "FileExistsError"
    assert (out / "graph.csv").read_bytes() == before
    ok("build", "--embeddings", workspace / "a.npy", "--k", 0.1, "--out", out, "--force")
    assert (out / "graph.csv").read_bytes() != before


def test_build_then_stats(workspace):
    out = built(workspace)
    (out / "graph.csv").rename(workspace / "graph.csv")
    ok("build", "--embeddings", workspace / "a.npy", "--auto-k", "--out", workspace / "auto",
       "--graphml", "--dot", "--vocab", workspace / "vocab.txt")
    info = json.loads((workspace / "auto" / "build.json").read_text())["graph"]
    assert info["auto_k"] and (workspace / "auto" / "graph.graphml").exists()
    ok("stats", "--graph", workspace / "auto" / "graph.csv", "--vocab", workspace / "vocab.txt",
       "--baseline", "both", "--out", workspace / "st")
    doc = json.loads((workspace / "st" / "stats.json").read_text())
    g = load_graph(workspace / "auto" / "graph.csv")
    assert doc["components"] == 1
    assert doc["basic"]["avg_degree"] == pytest.approx(2 * g.edge_count / g.n)
    assert [b["model"] for b in doc["baselines"]] == ["gnm", "configuration"]
    deg = (workspace / "st" / "degrees.csv").read_text().splitlines()
    assert deg[0] == "node,token,degree,strength" and len(deg) == 201
    assert deg[1].split(",")[1] == "#w0" and deg[2].split(",")[1] == "w1"


def test_paths_and_kpaths(workspace):
    a = workspace / "a.npy"
    common = ["--embeddings", a, "--auto-k", "--vocab", workspace / "vocab.txt"]
    ok("paths", *common, "--source", "w1", "--target", "w2", "--out", workspace / "p")
    p = json.loads((workspace / "p" / "path.json").read_text())["paths"][0]
    assert p["nodes"][0] == "w1" and p["nodes"][-1] == "w2"
    ok("kpaths", *common, "--source", "w1", "--target", "w2", "--num-paths", 3, "--out", workspace / "k")
    ps = json.loads((workspace / "k" / "kpaths.json").read_text())["paths"]
    assert len(ps) == 3 and ps[0] == p
    costs = [x["metric_length"] for x in ps]
    assert costs == sorted(costs)
    assert (workspace / "k" / "kpaths.dot").read_text().startswith("graph")


def test_scenario1_two_models(workspace):
    ok("scenario1", "--embeddings", workspace / "a.npy", "--embeddings", workspace / "b.npy", "--auto-k",
       "--vocab", workspace / "vocab.txt", "--groups", workspace / "groups.json",
       "--label", "A", "--label", "B", "--out", workspace / "s1")
    d = workspace / "s1"
    rows, cols, mat = read_heatmap_csv(d / "scenario1_A.csv")
    assert rows == cols == ["alpha", "beta", "RANDOM"]
    assert mat[0][1] == mat[1][0]
    _, _, diff = read_heatmap_csv(d / "scenario1_diff.csv")
    _, _, a = read_heatmap_csv(d / "scenario1_A.csv")
    _, _, b = read_heatmap_csv(d / "scenario1_B.csv")
    for i in range(3):
        for j in range(3):
            assert diff[i][j] == pytest.approx(b[i][j] - a[i][j], abs=2e-5)
    doc = json.loads((d / "scenario1.json").read_text())
    assert doc["difference"]["minuend"] == "B"
    assert doc["models"][0]["groups"][2]["seed"] == 0
    assert (d / "scenario1_diff.svg").exists() and (d / "scenario1_stars.csv").exists()


def test_scenario1_single_group(workspace):
    (workspace / "one.json").write_text(json.dumps({"alpha": [f"w{i}" for i in range(1, 11)]}))
    ok("scenario1", "--embeddings", workspace / "a.npy", "--auto-k", "--vocab", workspace / "vocab.txt",
       "--groups", workspace / "one.json", "--out", workspace / "s1")
    rows, cols, mat = read_heatmap_csv(workspace / "s1" / "scenario1_model0.csv")
    assert rows == ["alpha"] and len(mat) == 1 and len(mat[0]) == 1


def test_scenario2(workspace):
    ok("scenario2", "--embeddings", workspace / "a.npy", "--embeddings", workspace / "b.npy", "--auto-k",
       "--vocab", workspace / "vocab.txt", "--relations", workspace / "rel.tsv", "--out", workspace / "s2")
    lines = (workspace / "s2" / "scenario2.csv").read_text().splitlines()
    assert lines[0] == "relation,name,mean_model0,mean_model1,diff,stars"
    assert [line.split(",")[0] for line in lines[1:]] == ["A", "B"]
    doc = json.loads((workspace / "s2" / "scenario2.json").read_text())
    assert doc["models"][0]["relations"][0]["pairs"] == 15


def test_scenario2_min_words(workspace, capsys):
    code = run(["scenario2", "--embeddings", str(workspace / "a.npy"), "--auto-k",
                "--vocab", str(workspace / "vocab.txt"), "--relations", str(workspace / "rel.tsv"),
                "--min-words", "40", "--out", str(workspace / "s2")])
    assert code == 1 and "fewer than 40" in capsys.readouterr().err


def test_scenario3_modes(workspace):
    base = ["--embeddings", workspace / "a.npy", "--vocab", workspace / "vocab.txt",
            "--concepts", workspace / "concepts.txt", "--gt", workspace / "gt.tsv"]
    ok("scenario3", *base, "--tau", -2, "--out", workspace / "t")
    m = json.loads((workspace / "t" / "scenario3.json").read_text())["models"][0]
    assert m["model"]["edges"] == 190 and m["reference"]["recall"] == 1.0
    assert m["gt"]["edges"] == 9
    ok("scenario3", *base, "--k", 0.05, "--subgraph-mode", "induced", "--out", workspace / "i")
    m = json.loads((workspace / "i" / "scenario3.json").read_text())["models"][0]
    assert m["mode"] == "induced" and m["global_graph"]["k"] == pytest.approx(0.05, abs=1e-4)


def test_export_graph_and_matrix(workspace):
    out = built(workspace)
    for fmt in ("graphml", "dot", "csv"):
        ok("export", "--graph", out / "graph.csv", "--to", fmt, "--out", workspace / fmt)
    assert (workspace / "csv" / "graph.csv").read_bytes() == (out / "graph.csv").read_bytes()
    (workspace / "m.csv").write_text(",a,b\na,1,2\nb,2,-1\n")
    ok("export", "--matrix", workspace / "m.csv", "--diverging", "--out", workspace / "hm")
    assert (workspace / "hm" / "m.csv").read_text() == ",a,b\na,1,2\nb,2,-1\n"
    assert "<svg" in (workspace / "hm" / "m.svg").read_text()
