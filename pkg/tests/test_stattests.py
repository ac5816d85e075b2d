import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conceptspace.stattests import (betainc, pearson, spearman, stars, student_ttest, t_sf_two_sided,
                                    welch_ttest)


def test_quadrature_oracle_sanity():
    # I_x(1, 1) = x and I_x(a, 1) = x^a in closed form
    assert oracles.betainc_quad(1.0, 1.0, 0.3) == pytest.approx(0.3, abs=1e-12)
    assert oracles.betainc_quad(2.5, 1.0, 0.4) == pytest.approx(0.4 ** 2.5, abs=1e-12)
    # Cauchy: two-sided tail at t=1 with df=1 is exactly 1/2
    assert oracles.t_two_sided_quad(1.0, 1.0) == pytest.approx(0.5, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.05, 50), st.floats(0.05, 50), st.floats(0.0, 1.0))
def test_betainc_matches_quadrature(a, b, x):
    assert betainc(a, b, x) == pytest.approx(oracles.betainc_quad(a, b, x), abs=1e-8)


def test_betainc_domain():
    assert betainc(2, 3, 0.0) == 0.0 and betainc(2, 3, 1.0) == 1.0
    with pytest.raises(ValueError):
        betainc(0, 1, 0.5)
    with pytest.raises(ValueError):
        betainc(1, 1, 1.5)


def test_t_tail():
    assert t_sf_two_sided(0.0, 5) == 1.0
    assert t_sf_two_sided(math.inf, 5) == 0.0


def test_welch_examples():
    r = welch_ttest([1, 2, 3], [1, 2, 3])
    assert r.t == 0 and r.p == 1
    r = welch_ttest([1, 2, 3, 4, 5], [2, 3, 4, 5, 6])
    assert r.t == pytest.approx(-1.0, abs=1e-12)
    assert r.df == pytest.approx(8.0, abs=1e-12)
    assert r.p == pytest.approx(0.3466, abs=5e-4)
    assert r.p == pytest.approx(oracles.t_two_sided_quad(-1.0, 8.0), abs=1e-9)
    r = welch_ttest([0, 0, 0, 0], [10, 10, 10, 10.0001])
    assert r.p < 0.001 and r.stars == 3


def test_degenerate_constant_samples():
    r = welch_ttest([2, 2], [2, 2])
    assert (r.t, r.p) == (0.0, 1.0)
    r = welch_ttest([1, 1, 1], [3, 3, 3])
    assert r.t == -math.inf and r.p == 0.0 and r.stars == 3
    with pytest.raises(ValueError):
        welch_ttest([1], [1, 2])


@pytest.mark.parametrize("seed", range(100))
def test_welch_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    xs = rng.normal(0, rng.uniform(0.5, 3), int(rng.integers(2, 40))).tolist()
    ys = rng.normal(rng.uniform(-2, 2), rng.uniform(0.5, 3), int(rng.integers(2, 40))).tolist()
    r = welch_ttest(xs, ys)
    t, df, p = oracles.welch_oracle(xs, ys)
    assert r.t == pytest.approx(t, rel=1e-9)
    assert r.df == pytest.approx(df, rel=1e-9)
    assert abs(r.p - p) <= 5e-4
    assert r.p == pytest.approx(p, abs=1e-8)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=2, max_size=20),
       st.lists(st.floats(-100, 100), min_size=2, max_size=20))
def test_welch_antisymmetry(xs, ys):
    a, b = welch_ttest(xs, ys), welch_ttest(ys, xs)
    assert a.t == pytest.approx(-b.t, rel=1e-12, abs=1e-12) or (math.isinf(a.t) and a.t == -b.t)
    assert a.p == pytest.approx(b.p, abs=1e-12)
    assert 0.0 <= a.p <= 1.0


def test_student_matches_pooled_formula():
    from scipy import stats as sps
    rng = np.random.default_rng(1)
    for _ in range(20):
        xs, ys = rng.normal(0, 1, 8), rng.normal(0.5, 2, 13)
        r = student_ttest(xs, ys)
        ref = sps.ttest_ind(xs, ys, equal_var=True)
        assert r.df == 19
        assert r.t == pytest.approx(ref.statistic, rel=1e-10)
        assert r.p == pytest.approx(ref.pvalue, abs=1e-9)


@pytest.mark.parametrize("p,n", [(0.0009, 3), (0.001, 2), (0.005, 2), (0.01, 1), (0.03, 1),
                                 (0.05, 0), (0.2, 0), (None, 0)])
def test_star_ladder(p, n):
    assert stars(p) == n


def test_pearson_examples():
    x = [1.0, 2.0, 3.0, 4.0]
    assert pearson(x, [2 * v + 3 for v in x]) == pytest.approx(1.0, abs=1e-15)
    assert pearson(x, [-v for v in x]) == pytest.approx(-1.0, abs=1e-15)
    assert pearson(x, [1, 3, 2, 4]) == pytest.approx(0.8, abs=1e-9)
    with pytest.raises(ValueError):
        pearson([1, 1, 1], [1, 2, 3])
    with pytest.raises(ValueError):
        pearson([1, 2], [1, 2, 3])


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_pearson_matches_direct_formula(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 50))
    xs, ys = rng.normal(size=n).tolist(), rng.normal(size=n).tolist()
    assert pearson(xs, ys) == pytest.approx(oracles.pearson_direct(xs, ys), abs=1e-9)


def test_spearman_ties():
    from scipy import stats as sps
    x = [1, 2, 2, 3, 5, 5, 5]
    y = [3, 1, 4, 4, 2, 9, 9]
    assert spearman(x, y) == pytest.approx(sps.spearmanr(x, y).statistic, abs=1e-12)
