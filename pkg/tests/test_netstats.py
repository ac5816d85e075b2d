import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conceptspace.graph import GraphError, build
from conceptspace.netstats import (avg_local_clustering, baseline_clustering, configuration_model,
                                   degree_stats, degree_table, global_clustering, global_stats, gnm,
                                   histogram, is_graphical, local_clustering, path_length_stats,
                                   random_baseline, triangles_per_node)

PAW = [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0), (2, 3, 1.0)]  # ab, bc, ca, cd


def complete(n, w=1.0):
    return build(n, [(i, j, w) for i in range(n) for j in range(i + 1, n)])


def star():
    return build(4, [(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)])


def test_degree_examples():
    d = degree_stats(complete(3, 0.5))
    assert (d.avg_degree, d.std_degree, d.avg_wdegree) == (2.0, 0.0, 1.0)
    s = degree_stats(star())
    assert s.degrees.tolist() == [3, 1, 1, 1]
    assert s.avg_degree == 1.5
    assert s.std_degree == pytest.approx(math.sqrt(0.75), abs=1e-15)


def test_clustering_examples():
    assert global_clustering(complete(4)) == 1.0
    assert avg_local_clustering(complete(4)) == 1.0
    assert global_clustering(build(3, [(0, 1, 1.0), (1, 2, 1.0)])) == 0.0
    assert avg_local_clustering(star()) == 0.0
    paw = build(4, PAW)
    assert global_clustering(paw) == pytest.approx(0.6, abs=1e-15)
    assert avg_local_clustering(paw) == pytest.approx(7 / 12, abs=1e-15)
    np.testing.assert_allclose(local_clustering(paw), [1, 1, 1 / 3, 0])
    assert triangles_per_node(paw).tolist() == [1, 1, 1, 0]


def test_clustering_empty_graph():
    g = build(3, [])
    assert global_clustering(g) == 0.0 and avg_local_clustering(g) == 0.0


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_clustering_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 40))
    edges = oracles.random_edges(rng, n, float(rng.uniform(0.05, 0.6)))
    g = build(n, edges)
    gcc, alcc = global_clustering(g), avg_local_clustering(g)
    assert gcc == pytest.approx(oracles.brute_gcc(n, edges), abs=1e-12)
    assert alcc == pytest.approx(oracles.brute_alcc(n, edges), abs=1e-12)
    assert 0.0 <= gcc <= 1.0 and 0.0 <= alcc <= 1.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_trees_have_zero_clustering(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 40))
    tree = oracles.random_edges(rng, n, 0.0, connected=True)
    g = build(n, tree)
    assert global_clustering(g) == 0.0 and avg_local_clustering(g) == 0.0


def test_path_examples():
    d, a = path_length_stats(build(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]))
    assert d == 3 and a == pytest.approx(10 / 6)
    assert path_length_stats(complete(5)) == (1, 1.0)
    d, a = path_length_stats(build(4, PAW))
    assert d == 2 and a == pytest.approx(8 / 6)


def test_path_stats_disconnected():
    g = build(5, [(0, 1, 1.0), (1, 2, 1.0), (3, 4, 1.0)])
    with pytest.raises(GraphError, match="disconnected"):
        path_length_stats(g)
    d, a = path_length_stats(g, largest_component=True)
    assert (d, a) == (2, pytest.approx(4 / 3))
    with pytest.raises(ValueError):
        path_length_stats(g, mode="sampled")
    with pytest.raises(ValueError):
        path_length_stats(g, mode="fast")


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_path_stats_match_floyd_warshall(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 40))
    edges = oracles.random_edges(rng, n, float(rng.uniform(0.0, 0.3)), connected=True)
    d = oracles.floyd_warshall(n, edges)
    off = d[~np.eye(n, dtype=bool)]
    diam, aspl = path_length_stats(build(n, edges))
    assert diam == int(off.max())
    assert aspl == pytest.approx(float(off.mean()), abs=1e-12)
    assert diam >= math.ceil(aspl - 1e-12)
    sd, sa = path_length_stats(build(n, edges), mode="sampled", sources=n, seed=3)
    assert (sd, sa) == (diam, pytest.approx(aspl, abs=1e-12))
    ld, _ = path_length_stats(build(n, edges), mode="sampled", sources=max(1, n // 3), seed=3)
    assert ld <= diam


def test_threads_do_not_change_results():
    rng = np.random.default_rng(9)
    n = 700
    edges = oracles.random_edges(rng, n, 0.01, connected=True)
    g = build(n, edges)
    assert path_length_stats(g, threads=1) == path_length_stats(g, threads=3)


def test_global_stats_sections():
    g = build(4, [(0, 1, 0.5), (1, 2, 0.25), (0, 2, 0.75), (2, 3, 0.5)])
    st_ = global_stats(g)
    assert st_.avg_degree == 2 * g.edge_count / g.n
    d = st_.to_json()
    assert set(d) == {"basic", "weighted", "small_world"}
    assert d["weighted"]["threshold"] == 0.25
    assert d["small_world"]["diameter"] == 2 and "diameter_lower_bound" not in d["small_world"]
    s = global_stats(g, mode="sampled", sources=2, seed=1).to_json()
    assert "diameter_lower_bound" in s["small_world"]
    assert s["small_world"]["sources"] == 2 and s["small_world"]["seed"] == 1


def test_gnm_examples():
    k5 = gnm(5, 10, seed=1)
    assert k5.edge_count == 10 and global_clustering(k5) == 1.0
    with pytest.raises(ValueError):
        gnm(5, 11)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 60), st.data())
def test_gnm_properties(n, data):
    m = data.draw(st.integers(0, n * (n - 1) // 2))
    seed = data.draw(st.integers(0, 1000))
    g = gnm(n, m, seed)
    e = g.edges()
    assert g.edge_count == m and len(e.pairs()) == m
    assert (e.u < e.v).all()
    h = gnm(n, m, seed)
    assert g.indices.tobytes() == h.indices.tobytes() and g.indptr.tobytes() == h.indptr.tobytes()


def test_gnm_density_alcc():
    vals = [avg_local_clustering(gnm(1000, 4995, s)) for s in range(10)]
    assert 0.005 <= float(np.mean(vals)) <= 0.015


def test_is_graphical_matches_networkx():
    rng = np.random.default_rng(0)
    for _ in range(300):
        n = int(rng.integers(1, 12))
        deg = rng.integers(0, n, n).tolist()
        assert is_graphical(deg) == nx.is_graphical(deg)
    assert not is_graphical([1])
    assert not is_graphical([-1, 1])


def test_configuration_model_preserves_degrees():
    rng = np.random.default_rng(2)
    g0 = build(80, oracles.random_edges(rng, 80, 0.1))
    deg = g0.degrees
    g = configuration_model(deg, seed=5)
    assert g.degrees.tolist() == deg.tolist()
    assert (g.edges().u < g.edges().v).all() and len(g.edges().pairs()) == g.edge_count
    h = configuration_model(deg, seed=5)
    assert g.indices.tobytes() == h.indices.tobytes()
    with pytest.raises(ValueError):
        configuration_model([3, 1, 1])


def test_random_baseline_dispatch():
    g = random_baseline(10, 12, "gnm", seed=1)
    assert g.edge_count == 12
    with pytest.raises(ValueError):
        random_baseline(10, 12, "configuration")
    with pytest.raises(ValueError):
        random_baseline(10, 12, "lattice")
    base = build(6, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0), (4, 5, 1.0), (0, 5, 1.0)])
    r = baseline_clustering(base, "configuration", [0, 1])
    assert r["model"] == "configuration" and r["seeds"] == [0, 1] and len(r["gcc_per_seed"]) == 2


def test_degree_table_and_histogram():
    g = build(3, [(0, 1, 0.5)])
    assert degree_table(g) == [(0, 1, 0.5), (1, 1, 0.5), (2, 0, 0.0)]
    h = histogram(np.array([0, 1, 1, 2]), bins=2)
    assert [c for _, _, c in h] == [1, 3]
