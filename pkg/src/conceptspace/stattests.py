"""Two-sample t-tests and correlation coefficients.

The Student-t tail probability goes through the regularized incomplete
beta function, evaluated with a Lentz continued fraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

_EPS = 1e-15
_TINY = 1e-300
_MAX_ITER = 500


def _betacf(a: float, b: float, x: float) -> float:
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = _TINY if abs(d) < _TINY else d
        c = 1.0 + aa / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = _TINY if abs(d) < _TINY else d
        c = 1.0 + aa / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValueError("betainc needs a, b > 0")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    # the fraction converges fast only on this side of the mean
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_sf_two_sided(t: float, df: float) -> float:
    """P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    if math.isinf(t):
        return 0.0
    return min(1.0, betainc(df / 2.0, 0.5, df / (df + t * t)))


def stars(p: float | None) -> int:
    if p is None:
        return 0
    if p < 0.001:
        return 3
    if p < 0.01:
        return 2
    if p < 0.05:
        return 1
    return 0


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: float
    p: float

    @property
    def stars(self) -> int:
        return stars(self.p)


def _moments(xs: Sequence[float]) -> tuple[int, float, float]:
    arr = np.asarray(xs, dtype=np.float64)
    n = len(arr)
    if n < 2:
        raise ValueError(f"t-test needs at least 2 observations per sample, got {n}")
    return n, float(arr.mean()), float(arr.var(ddof=1))


def _degenerate(mx: float, my: float, df: float) -> TTestResult:
    if mx == my:
        return TTestResult(0.0, df, 1.0)
    return TTestResult(math.copysign(math.inf, mx - my), df, 0.0)


def welch_ttest(xs: Sequence[float], ys: Sequence[float]) -> TTestResult:
    """Two-sided Welch t-test (unequal variances)."""
    nx, mx, vx = _moments(xs)
    ny, my, vy = _moments(ys)
    ax, ay = vx / nx, vy / ny
    se2 = ax + ay
    if se2 == 0.0:
        return _degenerate(mx, my, float(nx + ny - 2))
    t = (mx - my) / math.sqrt(se2)
    df = se2 * se2 / (ax * ax / (nx - 1) + ay * ay / (ny - 1))
    return TTestResult(t, df, t_sf_two_sided(t, df))


def student_ttest(xs: Sequence[float], ys: Sequence[float]) -> TTestResult:
    """Two-sided pooled-variance t-test."""
    nx, mx, vx = _moments(xs)
    ny, my, vy = _moments(ys)
    df = nx + ny - 2
    pooled = ((nx - 1) * vx + (ny - 1) * vy) / df
    se2 = pooled * (1.0 / nx + 1.0 / ny)
    if se2 == 0.0:
        return _degenerate(mx, my, float(df))
    t = (mx - my) / math.sqrt(se2)
    return TTestResult(t, float(df), t_sf_two_sided(t, df))


TTESTS = {"welch": welch_ttest, "student": student_ttest}


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("pearson needs two equal-length vectors")
    if len(x) < 2:
        raise ValueError("pearson needs at least 2 observations")
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise ValueError("correlation is undefined for a constant vector")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def _average_ranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x))
    sx = x[order]
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    return pearson(_average_ranks(x), _average_ranks(y))


CORRELATIONS = {"pearson": pearson, "spearman": spearman}
