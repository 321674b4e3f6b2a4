import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mprsel.diagnostics import kaplan_meier, weibull_check_points
from mprsel.errors import NoEvents, TooFewPoints


def naive_km(t, delta):
    """Textbook product-limit loop, used as an independent oracle."""
    times, surv, gw = [], [], []
    s, acc = 1.0, 0.0
    for u in sorted(set(t[delta == 1])):
        r = sum(1 for v in t if v >= u)
        d = sum(1 for v, e in zip(t, delta) if v == u and e == 1)
        s *= 1 - d / r
        acc += d / (r * (r - d)) if r > d else np.inf
        times.append(u)
        surv.append(s)
        gw.append(s * s * acc if s > 0 else 0.0)
    return np.array(times), np.array(surv), np.array(gw)


def test_small_example():
    km = kaplan_meier([1, 2, 3], [1, 0, 1])
    assert np.array_equal(km.times, [1, 3])
    assert np.array_equal(km.n_risk, [3, 1])
    assert np.allclose(km.survival, [2 / 3, 0.0])
    assert km(0.5) == 1.0 and km(2.5) == pytest.approx(2 / 3) and km(10) == 0.0


def test_no_events():
    with pytest.raises(NoEvents):
        kaplan_meier([1, 2], [0, 0])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 15), st.booleans()), min_size=1, max_size=40))
def test_matches_naive_product_limit(rows):
    t = np.array([float(a) for a, _ in rows])
    delta = np.array([float(b) for _, b in rows])
    if delta.sum() == 0:
        delta[0] = 1.0
    km = kaplan_meier(t, delta)
    times, surv, gw = naive_km(t, delta)
    assert np.array_equal(km.times, times)
    assert np.allclose(km.survival, surv, rtol=1e-12, atol=0)
    assert np.allclose(km.greenwood_var, gw, rtol=1e-10, atol=0)
    assert np.all(np.diff(km.survival) <= 0)


def test_weibull_check_recovers_shape():
    rng = np.random.default_rng(0)
    T = 1.5 * rng.weibull(2.0, size=5000)
    C = rng.exponential(3.0, size=5000)
    check = weibull_check_points(kaplan_meier(np.minimum(T, C), (T <= C).astype(float)))
    assert check.slope == pytest.approx(2.0, abs=0.05)
    assert check.intercept == pytest.approx(-2.0 * np.log(1.5), abs=0.1)
    assert check.r_squared > 0.99
    ok = np.isfinite(check.ci_lo)
    assert np.all(check.ci_lo[ok] <= check.log_H[ok]) and np.all(check.log_H[ok] <= check.ci_hi[ok])
    assert check.columns == ("log_t", "log_H", "ci_lo", "ci_hi")


def test_too_few_points():
    with pytest.raises(TooFewPoints):
        weibull_check_points(kaplan_meier([1.0, 2.0], [1, 1]))
