import math

import numpy as np
import pytest
import scipy.special
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from tumorpipe.stats import betainc, pooled_ttest, t_two_tailed_p


def _t_density(x, df):
    c = math.exp(math.lgamma((df + 1) / 2) - math.lgamma(df / 2)) / math.sqrt(df * math.pi)
    return c * (1 + x * x / df) ** (-(df + 1) / 2)


def _tail_by_quadrature(t, df):
    val, _ = quad(_t_density, abs(t), math.inf, args=(df,), epsabs=1e-14, epsrel=1e-12)
    return 2 * val


def test_hand_computed_example():
    t, p, df = pooled_ttest([1, 2, 3], [4, 5, 6])
    assert df == 4
    assert t == pytest.approx(-3 / math.sqrt(2 / 3), rel=1e-12)
    assert p == pytest.approx(_tail_by_quadrature(t, 4), rel=1e-9)
    assert p == pytest.approx(0.0214, abs=1e-4)


@pytest.mark.parametrize("t, df", [(0.1, 1), (1.5, 3), (2.0, 10), (4.2, 28), (7.5, 57), (0.7, 200)])
def test_tail_matches_quadrature(t, df):
    assert t_two_tailed_p(t, df) == pytest.approx(_tail_by_quadrature(t, df), rel=1e-8, abs=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.05, 60), st.floats(0.05, 60), st.floats(0, 1))
def test_betainc_matches_scipy(a, b, x):
    assert betainc(a, b, x) == pytest.approx(scipy.special.betainc(a, b, x), abs=1e-11)


def test_degenerate_groups():
    assert pooled_ttest([0.5, 0.5], [0.5, 0.5])[:2] == (0.0, 1.0)
    t, p, _ = pooled_ttest([0, 0], [1, 1])
    assert t == -math.inf and p == 0.0
    with pytest.raises(ValueError):
        pooled_ttest([1], [2, 3])


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000), st.floats(1e-3, 1e3), st.floats(-1e3, 1e3))
def test_sign_flip_and_affine_invariance(seed, scale, shift):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=7)
    b = rng.normal(loc=0.5, size=9)
    t, p, _ = pooled_ttest(a, b)
    t2, p2, _ = pooled_ttest(b, a)
    assert t2 == pytest.approx(-t, rel=1e-12) and p2 == pytest.approx(p, rel=1e-12)
    _, p3, _ = pooled_ttest(a * scale + shift, b * scale + shift)
    assert p3 == pytest.approx(p, rel=1e-9, abs=1e-12)


def test_betainc_domain():
    with pytest.raises(ValueError):
        betainc(0, 1, 0.5)
    with pytest.raises(ValueError):
        betainc(1, 1, 1.5)
    assert betainc(2, 3, 0) == 0 and betainc(2, 3, 1) == 1
