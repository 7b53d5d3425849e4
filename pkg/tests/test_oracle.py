import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from malliavin_sgd.errors import QuadratureError, UsageError
from malliavin_sgd.oracle import bs_call, max_call_iid, normal_cdf
from oracles import mp_bs_call, mp_max_call

# 30-digit mpmath values (tests/oracles.py), rounded to double
FROZEN_BS_100_100_02_2 = 11.24629160182849
FROZEN_MAXCALL_D100 = {60: 102.46262456818724, 100: 62.46262456818724, 140: 22.523704345836325}
FROZEN_MAXCALL_D2 = 13.90596458075314


def test_bs_call_frozen():
    o = bs_call(100, 100, 0.2, 2)
    assert o.method == "closed-form" and o.error_bound is None
    assert o.value == pytest.approx(FROZEN_BS_100_100_02_2, rel=1e-14)
    assert round(o.value, 2) == 11.25


@given(st.floats(50, 200), st.floats(50, 200), st.floats(0.05, 0.8), st.floats(0.1, 5))
def test_bs_call_matches_mpmath(x0, K, sigma, T):
    assert bs_call(x0, K, sigma, T).value == pytest.approx(mp_bs_call(x0, K, sigma, T), rel=1e-10, abs=1e-10)


def test_bs_call_limits():
    assert bs_call(100, 1e-9, 0.2, 2).value == pytest.approx(100.0 - 1e-9, rel=1e-14)
    assert bs_call(100, 1e6, 0.2, 2).value < 1e-12
    for bad in [(0, 100, 0.2, 1), (100, -1, 0.2, 1), (100, 100, 0, 1), (100, 100, 0.2, float("nan"))]:
        with pytest.raises(UsageError):
            bs_call(*bad)


def test_bs_call_monotone():
    Ks = np.linspace(60, 140, 17)
    v = [bs_call(100, K, 0.2, 2).value for K in Ks]
    assert all(b < a for a, b in zip(v, v[1:]))
    s = [bs_call(100, 100, sig, 2).value for sig in np.linspace(0.05, 0.8, 16)]
    assert all(b > a for a, b in zip(s, s[1:]))
    t = [bs_call(100, 110, 0.2, T).value for T in np.linspace(0.1, 5, 16)]
    assert all(b > a for a, b in zip(t, t[1:]))


def test_normal_cdf_accuracy():
    import mpmath as mp

    for z in np.linspace(-8, 8, 33):
        assert abs(normal_cdf(z) - float(mp.ncdf(z))) <= 1e-15


@pytest.mark.parametrize("K", [60, 100, 140])
def test_max_call_frozen_d100(K):
    o = max_call_iid(100, K, 0.2, 1, 100)
    assert o.method == "quadrature"
    assert o.value == pytest.approx(FROZEN_MAXCALL_D100[K], rel=1e-10)
    assert 0 < o.error_bound < 1e-4 * o.value


def test_max_call_d1_is_bs():
    for K in (60, 100, 140):
        assert max_call_iid(100, K, 0.2, 1, 1).value == pytest.approx(bs_call(100, K, 0.2, 1).value, abs=1e-6)


def test_max_call_grows_with_d():
    assert max_call_iid(100, 100, 0.2, 1, 2).value == pytest.approx(FROZEN_MAXCALL_D2, rel=1e-10)
    vals = [max_call_iid(100, 100, 0.2, 1, d).value for d in (1, 2, 5, 20, 100)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


@given(st.integers(1, 200), st.floats(40, 200), st.floats(0.05, 0.6), st.floats(0.2, 3))
def test_max_call_matches_mpmath(d, K, sigma, T):
    ref = mp_max_call(100, K, sigma, T, d)
    got = max_call_iid(100, K, sigma, T, d)
    assert abs(got.value - ref) <= max(1e-4 * ref, 1e-9)


def test_max_call_bound_shrinks_under_refinement():
    for K in (60, 100, 140):
        bounds = [max_call_iid(100, K, 0.2, 1, 100, rtol=r).error_bound for r in (1e-5, 1e-7, 1e-9, 1e-11)]
        assert all(b <= a for a, b in zip(bounds, bounds[1:]))
        assert bounds[-1] <= bounds[0] / 2


def test_max_call_errors(monkeypatch):
    with pytest.raises(UsageError):
        max_call_iid(100, 100, 0.2, 1, 0)
    from scipy import integrate

    monkeypatch.setattr(integrate, "quad", lambda *a, **k: (1.0, 1.0))
    with pytest.raises(QuadratureError) as info:
        max_call_iid(100, 100, 0.2, 1, 3)
    assert info.value.bound >= 1.0
