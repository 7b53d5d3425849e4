import math

import numpy as np
import pytest

from conftest import constant_model
from malliavin_sgd.errors import UsageError
from malliavin_sgd.estimate import (
    combined_se,
    estimate_em_mc,
    estimate_em_mc_multi,
    estimate_exact_gbm_mc,
    estimate_exact_gbm_mc_multi,
    estimate_wa_mc,
    estimate_wa_mc_multi,
    estimate_wa_sgd,
    estimate_wa_sgd_multi,
    gbm_terminal,
    trial_summary,
    weighted_samples,
)
from malliavin_sgd.model import basket_call, black_scholes_model, constant_payoff
from malliavin_sgd.optimize import ScheduleSpec, TrainConfig, d10_schedule
from malliavin_sgd.rng import sample_increments
from malliavin_sgd.simulate import batch_mean, simulate_batch
from oracles import em_1d, mp_bs_call

BS_REF = mp_bs_call(100, 100, 0.2, 2)
X1 = np.array([100.0])


def test_sgd_constant_payoff_m1(bs10):
    train = TrainConfig(M=64, J=200, optimizer="sgd", schedule=ScheduleSpec(((100, 0.5), (200, 0.25))))
    r = estimate_wa_sgd(bs10, np.full(10, 100.0), constant_payoff(5.0), 1.0, 2, 1, train, seed=3)
    assert r.method == "WA-SGD" and r.std_err is None
    assert abs(r.value - 5.0) < 1e-6


def test_sgd_d1_close_to_closed_form(bs1):
    train = TrainConfig(M=1024, J=4000, optimizer="adam", schedule=d10_schedule(100))
    r = estimate_wa_sgd(bs1, X1, basket_call(100), 2.0, 4, 2, train, seed=123)
    assert abs(r.value - BS_REF) < 0.15


def test_sgd_settings_reproduce_value(bs1):
    train = TrainConfig(M=32, J=50, schedule=ScheduleSpec.constant(0.1, 50))
    r = estimate_wa_sgd(bs1, X1, basket_call(95), 1.0, 2, 2, train, seed=8, trial=1)
    s = r.settings
    again = estimate_wa_sgd(bs1, X1, basket_call(95), s["T"], s["n"], s["m"], train, s["seed"], s["trial"])
    assert again.value == r.value
    assert s["M"] == 32 and s["J"] == 50 and s["optimizer"] == "adam"


def test_sgd_multi_equals_single(bs1):
    train = TrainConfig(M=64, J=30, schedule=ScheduleSpec.constant(0.1, 30))
    payoffs = [basket_call(90), basket_call(110)]
    multi = estimate_wa_sgd_multi(bs1, X1, payoffs, 1.0, 2, 2, train, seed=4)
    for p, r in zip(payoffs, multi):
        assert estimate_wa_sgd(bs1, X1, p, 1.0, 2, 2, train, seed=4).value == r.value


def test_sgd_trace_is_recorded(bs1):
    train = TrainConfig(M=16, J=20, schedule=ScheduleSpec.constant(0.1, 20), record_trace=True)
    r = estimate_wa_sgd(bs1, X1, basket_call(100), 1.0, 1, 2, train, seed=1)
    assert r.settings["trace"].shape == (20,) and r.settings["trace"][-1] == r.value


def test_wa_mc_single_path(bs1):
    r = estimate_wa_mc(bs1, X1, basket_call(100), 1.0, 3, 2, 1, seed=5)
    batch = sample_increments(5, 0, 0, 1, 3, 1, 1.0 / 3)
    assert r.value == simulate_batch(bs1, X1, basket_call(100), batch, 2)[0]
    assert math.isnan(r.std_err)


def test_wa_mc_matches_sample_reduction(bs10):
    x0 = np.full(10, 100.0)
    Y = weighted_samples(bs10, x0, [basket_call(100)], 2.0, 2, 2, 70_000, seed=6)[0]
    r = estimate_wa_mc(bs10, x0, basket_call(100), 2.0, 2, 2, 70_000, seed=6)
    assert r.value == batch_mean(Y)
    assert r.std_err == pytest.approx(np.std(Y, ddof=1) / math.sqrt(Y.size), rel=1e-10)


def test_wa_mc_multi_equals_single(bs10):
    x0 = np.full(10, 100.0)
    payoffs = [basket_call(K) for K in (80, 100, 120)]
    multi = estimate_wa_mc_multi(bs10, x0, payoffs, 2.0, 2, 2, 5000, seed=2, trial=1)
    for p, r in zip(payoffs, multi):
        single = estimate_wa_mc(bs10, x0, p, 2.0, 2, 2, 5000, seed=2, trial=1)
        assert single.value == r.value and single.std_err == r.std_err


def test_order1_equals_em_seed_for_seed(bs10):
    x0 = np.full(10, 100.0)
    for seed in (1, 2, 3):
        a = estimate_wa_mc(bs10, x0, basket_call(100), 2.0, 4, 1, 20_000, seed)
        b = estimate_em_mc(bs10, x0, basket_call(100), 2.0, 4, 20_000, seed)
        assert a.value == b.value and a.std_err == b.std_err
        assert b.method == "EM-MC"


def test_wa_mc_d1_n8(bs1):
    r = estimate_wa_mc(bs1, X1, basket_call(100), 2.0, 8, 2, 1_000_000, seed=88)
    assert abs(r.value - BS_REF) < 3 * r.std_err


@pytest.mark.parametrize("n", [4, 16])
def test_em_matches_exact_scheme(bs1, n):
    r = estimate_em_mc(bs1, X1, basket_call(100), 2.0, n, 1_000_000, seed=50 + n)
    assert abs(r.value - em_1d(100, 100, 0.2, 2.0, n)) < 4 * r.std_err


def test_em_deep_in_the_money(bs10):
    r = estimate_em_mc(bs10, np.full(10, 100.0), basket_call(60), 2.0, 4, 200_000, seed=9)
    # the hinge is almost never active: E = 40 up to a negligible put term
    assert abs(r.value - 40.0) < 4 * r.std_err + 1e-3


def test_gbm_terminal_at_zero(bs10):
    x = gbm_terminal(bs10, np.full(10, 100.0), np.zeros(10), 2.0)
    np.testing.assert_allclose(x, 100.0 * math.exp(-0.5 * 0.04 * 2.0), rtol=1e-15)
    with pytest.raises(UsageError):
        gbm_terminal(constant_model(2), np.zeros(2), np.zeros(2), 1.0)


def test_exact_mc_d1(bs1):
    r = estimate_exact_gbm_mc(bs1, X1, basket_call(100), 2.0, 10_000_000, seed=31)
    assert r.method == "EXACT-MC"
    assert abs(r.value - BS_REF) < 3 * r.std_err


def test_exact_mc_error_scales_like_inverse_sqrt_paths(bs1):
    paths = np.array([10_000, 100_000, 1_000_000])
    res = [estimate_exact_gbm_mc(bs1, X1, basket_call(100), 2.0, int(p), seed=77) for p in paths]
    ses = np.array([r.std_err for r in res])
    slope = np.polyfit(np.log(paths), np.log(ses), 1)[0]
    assert -0.55 < slope < -0.45
    for r in res:
        assert abs(r.value - BS_REF) < 3 * r.std_err


def test_exact_mc_multi_equals_single(bs10):
    x0 = np.full(10, 100.0)
    payoffs = [basket_call(90), basket_call(110)]
    multi = estimate_exact_gbm_mc_multi(bs10, x0, payoffs, 2.0, 3000, seed=1)
    for p, r in zip(payoffs, multi):
        assert estimate_exact_gbm_mc(bs10, x0, p, 2.0, 3000, seed=1).value == r.value


def test_exact_mc_requires_black_scholes():
    m = constant_model(2)
    with pytest.raises(UsageError):
        estimate_exact_gbm_mc(m, np.zeros(2), basket_call(0), 1.0, 10, seed=0)


def test_invalid_settings(bs1):
    with pytest.raises(UsageError):
        estimate_wa_mc(bs1, X1, basket_call(100), 1.0, 2, 2, 0, seed=0)
    with pytest.raises(UsageError):
        estimate_em_mc(bs1, X1, basket_call(100), 0.0, 2, 10, seed=0)
    with pytest.raises(UsageError):
        estimate_wa_mc(bs1, X1, basket_call(100), 1.0, 2, 3, 10, seed=0)


def test_helpers():
    assert combined_se(3.0, 4.0, None, float("nan")) == 5.0
    mean, spread, se = trial_summary([1.0, 2.0, 3.0])
    assert mean == 2.0 and spread == 1.0 and se == pytest.approx(1 / math.sqrt(3))
    assert trial_summary([4.0]) == (4.0, 0.0, 0.0)
