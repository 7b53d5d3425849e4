import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from malliavin_sgd.errors import UsageError
from malliavin_sgd.experiment.config import (
    CONFIG_KEYS,
    ExperimentConfig,
    MethodConfig,
    ScheduleBand,
    load_config,
    parse_band,
    parse_config,
    parse_rates,
    to_ini,
)
from malliavin_sgd.recipes import find_root

BASE = """
[model]
d = 2
sigma = 0.2
T = 1.0
x0 = 100.0

[payoff]
family = basket_call
strikes = 90, 100, 110

[method a]
kind = wa-sgd
n = 1, 2
batch = 8
iterations = 10

[schedule all]
strikes = (-inf, inf)
rates = 10:0.1
"""


def test_parse_minimal():
    cfg = parse_config(BASE)
    assert cfg.d == 2 and cfg.strikes == (90.0, 100.0, 110.0)
    assert cfg.trials == 5 and cfg.seed == 0 and cfg.reference == "exact-mc"
    m = cfg.method("a")
    assert m.kind == "wa-sgd" and m.n == (1, 2) and m.batch == 8 and m.order == 2
    assert cfg.schedule_for(100).breakpoints == ((10, 0.1),)


@pytest.mark.parametrize(
    "text",
    [
        BASE.replace("[model]\n", "[model]\nfoo = 1\n"),
        BASE + "[bogus]\nx = 1\n",
        BASE + "[method b]\nkind = wa-mc\nn = 1\nwidth = 3\n",
    ],
)
def test_unknown_keys_and_sections(text):
    with pytest.raises(UsageError, match="unknown"):
        parse_config(text)


@pytest.mark.parametrize(
    "old,new",
    [
        ("kind = wa-sgd", "kind = magic"),
        ("n = 1, 2", "n = 0, 2"),
        ("d = 2", "d = two"),
        ("family = basket_call", "family = digital"),
        ("strikes = (-inf, inf)", "strikes = [95, 105]"),
        ("rates = 10:0.1", "rates = 10-0.1"),
        ("sigma = 0.2", "sigma = -0.2"),
    ],
)
def test_invalid_values(old, new):
    with pytest.raises(UsageError):
        parse_config(BASE.replace(old, new))


def test_overlapping_bands_rejected():
    text = BASE + "\n[schedule low]\nstrikes = (-inf, 100]\nrates = 10:0.5\n"
    with pytest.raises(UsageError, match="matches 2"):
        parse_config(text)


def test_band_parsing():
    b = parse_band("[90, 100]")
    assert b.contains(90) and b.contains(100) and not b.contains(100.1)
    o = parse_band("(100, inf)")
    assert not o.contains(100) and o.contains(1e9)
    assert str(parse_band("(-inf, 90)")) == "(-inf, 90.0)"
    with pytest.raises(UsageError):
        parse_band("90..100")


def test_recipes_parse():
    root = find_root()
    for path in sorted((root / "recipes").glob("*.ini")):
        cfg = load_config(path)
        assert parse_config(to_ini(cfg)) == cfg


def test_every_documented_key_is_accepted():
    # the docs table and the parser agree
    from malliavin_sgd.experiment.config import _METHOD_KEYS, _SCHEDULE_KEYS, _SECTION_KEYS

    for sec, keys in _SECTION_KEYS.items():
        assert set(CONFIG_KEYS[sec]) == set(keys)
    assert set(CONFIG_KEYS["method NAME"]) == set(_METHOD_KEYS)
    assert set(CONFIG_KEYS["schedule NAME"]) == set(_SCHEDULE_KEYS)


finite = st.floats(0.01, 1e4, allow_nan=False, allow_infinity=False)


@st.composite
def configs(draw):
    strikes = tuple(sorted(set(draw(st.lists(st.floats(1, 500), min_size=1, max_size=5)))))
    methods = []
    for i in range(draw(st.integers(0, 3))):
        methods.append(
            MethodConfig(
                name=f"m{i}",
                kind=draw(st.sampled_from(["wa-sgd", "wa-mc", "em-mc"])),
                n=tuple(draw(st.lists(st.integers(1, 64), min_size=1, max_size=4))),
                order=draw(st.sampled_from([1, 2])),
                paths=draw(st.integers(1, 10**7)),
                batch=draw(st.integers(1, 4096)),
                iterations=draw(st.integers(1, 100)),
                optimizer=draw(st.sampled_from(["adam", "sgd"])),
                theta0=draw(st.floats(-100, 100)),
                warm_start=draw(st.booleans()),
                tail_average=draw(st.floats(0, 0.9)),
            )
        )
    rates = parse_rates(f"100:{draw(st.floats(1e-6, 1.0))!r}")
    return ExperimentConfig(
        d=draw(st.integers(1, 200)),
        sigma=draw(finite),
        T=draw(finite),
        x0=draw(finite),
        payoff=draw(st.sampled_from(["basket_call", "max_call", "constant"])),
        strikes=strikes,
        methods=tuple(methods),
        schedules=(ScheduleBand("all", parse_band("(-inf, inf)"), rates),),
        trials=draw(st.integers(1, 50)),
        seed=draw(st.integers(0, 2**63 - 1)),
        reference=draw(st.sampled_from(["exact-mc", "oracle"])),
        reference_paths=draw(st.integers(1, 10**9)),
    )


@given(configs())
def test_round_trip_is_lossless(cfg):
    again = parse_config(to_ini(cfg))
    assert again == cfg
    assert to_ini(again) == to_ini(cfg)


def test_select_overrides():
    cfg = parse_config(BASE + "\n[method b]\nkind = em-mc\nn = 1\n")
    sub = cfg.select(["b"], trials=2, seed=9)
    assert [m.name for m in sub.methods] == ["b"] and sub.trials == 2 and sub.seed == 9
    with pytest.raises(UsageError, match="unknown method"):
        cfg.select(["zzz"])
    assert math.isinf(cfg.schedules[0].strikes.hi)
