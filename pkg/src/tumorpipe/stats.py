"""Student t tail probabilities via the regularized incomplete beta function."""

from __future__ import annotations

import math

import numpy as np

__all__ = ["betainc", "t_two_tailed_p", "pooled_ttest"]

_EPS = 1e-15
_TINY = 1e-300


def _betacf(a, b, x, max_iter=500):
    # modified Lentz evaluation of the continued fraction for I_x(a, b)
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta ``I_x(a, b)`` for ``a, b > 0``."""
    if not (a > 0 and b > 0):
        raise ValueError("betainc needs a > 0 and b > 0")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return float(x)
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_two_tailed_p(t: float, df: float) -> float:
    """``P(|T| >= |t|)`` for Student's t with ``df`` degrees of freedom."""
    if not df > 0:
        raise ValueError("degrees of freedom must be positive")
    if math.isinf(t):
        return 0.0
    if t == 0.0:
        return 1.0
    return min(1.0, float(betainc(0.5 * df, 0.5, df / (df + t * t))))


def pooled_ttest(a, b) -> tuple[float, float, int]:
    """Equal-variance two-sample t-test; returns ``(t, two-tailed p, df)``.

    Zero pooled variance is resolved without dividing: equal means give
    ``t = 0, p = 1`` and unequal means ``t = -/+inf, p = 0``.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = a.size, b.size
    if na < 2 or nb < 2:
        raise ValueError(f"each group needs at least 2 samples, got {na} and {nb}")
    df = na + nb - 2
    ma, mb = a.mean(), b.mean()
    ss = np.sum((a - ma) ** 2) + np.sum((b - mb) ** 2)
    diff = ma - mb
    if ss == 0.0:
        if diff == 0.0:
            return 0.0, 1.0, df
        return math.copysign(math.inf, diff), 0.0, df
    se = math.sqrt(ss / df * (1.0 / na + 1.0 / nb))
    t = diff / se
    return float(t), t_two_tailed_p(t, df), df
