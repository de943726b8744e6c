"""Paired-sample statistics: Student t-test, Cohen's d, Bonferroni.

The two-sided t-test p-value uses the identity
    P(|T_df| >= t) = I_x(df/2, 1/2),  x = df / (df + t^2)
with the regularized incomplete beta I computed by the standard continued
fraction (modified Lentz). No scipy here: the three-function surface is tiny
and this keeps the statistics auditable against the formulas they claim.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ValidationError

_MAX_ITER = 300
_EPS = 3e-14
_FPMIN = 1e-300


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ValidationError(
        f"incomplete beta continued fraction failed to converge "
        f"(a={a}, b={b}, x={x})"
    )


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    if a <= 0 or b <= 0:
        raise ValidationError("beta parameters must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b


def t_two_sided_p(t: float, df: int) -> float:
    if df < 1:
        raise ValidationError(f"degrees of freedom must be >= 1, got {df}")
    if math.isinf(t):
        return 0.0
    x = df / (df + t * t)
    return regularized_incomplete_beta(df / 2.0, 0.5, x)


def _paired_differences(xs, ys):
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.ndim != 1 or ys.ndim != 1:
        raise ValidationError("paired samples must be one-dimensional")
    if xs.shape[0] != ys.shape[0]:
        raise ValidationError(
            f"paired samples differ in length: {xs.shape[0]} vs {ys.shape[0]}"
        )
    if xs.shape[0] < 2:
        raise ValidationError("paired tests need at least two pairs")
    if not (np.isfinite(xs).all() and np.isfinite(ys).all()):
        raise ValidationError("paired samples contain non-finite values")
    return xs - ys


def paired_t_test(xs, ys):
    """Two-sided paired t-test; returns (t, p, df).

    All-zero differences give (0, 1, df). Constant non-zero differences have
    zero spread; the statistic diverges, reported as signed infinity with
    p = 0.
    """
    d = _paired_differences(xs, ys)
    n = d.shape[0]
    df = n - 1
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        if mean == 0.0:
            return 0.0, 1.0, df
        return math.copysign(math.inf, mean), 0.0, df
    t = mean / (sd / math.sqrt(n))
    return t, t_two_sided_p(t, df), df


def cohens_d_paired(xs, ys) -> float:
    d = _paired_differences(xs, ys)
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        raise ValidationError(
            "effect size undefined: differences have zero standard deviation"
        )
    return float(d.mean()) / sd


def bonferroni(p_values, k: int):
    """Multiply each p by k and cap at 1. k must cover the comparisons."""
    ps = list(p_values)
    if k < max(1, len(ps)):
        raise ValidationError(
            f"correction factor k={k} smaller than the {len(ps)} comparisons"
        )
    for p in ps:
        if not (0.0 <= p <= 1.0):
            raise ValidationError(f"p-value {p!r} outside [0, 1]")
    return [min(1.0, p * k) for p in ps]
