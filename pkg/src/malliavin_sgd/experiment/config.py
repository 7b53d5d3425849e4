"""Experiment configuration: an INI file with fixed sections and keys.

Layout::

    [model]
    d = 10
    sigma = 0.2
    T = 2.0
    x0 = 100.0

    [payoff]
    family = basket_call
    strikes = 60, 70, 80, 90, 100, 110, 120, 130, 140

    [study]
    trials = 5
    seed = 20240917

    [reference]
    kind = exact-mc          ; or: oracle
    paths = 10000000

    [method wa2]
    kind = wa-sgd            ; wa-sgd | wa-mc | em-mc
    order = 2
    n = 1, 2, 4
    batch = 1024
    iterations = 4000
    optimizer = adam

    [schedule low]
    strikes = (-inf, 90)
    rates = 600:0.5, 1200:0.01, 4000:0.001

Unknown sections or keys raise ``UsageError``.  ``to_ini`` writes the
canonical form, and ``parse_config(to_ini(c)) == c``.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional, Tuple

from ..errors import UsageError
from ..model import PAYOFF_FAMILIES
from ..optimize import OPTIMIZERS, ScheduleSpec

METHOD_KINDS = ("wa-sgd", "wa-mc", "em-mc")
REFERENCE_KINDS = ("exact-mc", "oracle")


@dataclass(frozen=True)
class StrikeBand:
    lo: float
    hi: float
    lo_closed: bool
    hi_closed: bool

    def contains(self, K: float) -> bool:
        above = K >= self.lo if self.lo_closed else K > self.lo
        below = K <= self.hi if self.hi_closed else K < self.hi
        return above and below

    def __str__(self):
        return "%s%s, %s%s" % (
            "[" if self.lo_closed else "(",
            _fmt(self.lo),
            _fmt(self.hi),
            "]" if self.hi_closed else ")",
        )


@dataclass(frozen=True)
class ScheduleBand:
    name: str
    strikes: StrikeBand
    schedule: ScheduleSpec


@dataclass(frozen=True)
class MethodConfig:
    name: str
    kind: str
    n: Tuple[int, ...]
    order: object = 2
    paths: int = 1_000_000
    batch: int = 1024
    iterations: int = 4000
    optimizer: str = "adam"
    theta0: float = 0.0
    warm_start: bool = False
    tail_average: float = 0.0


@dataclass(frozen=True)
class ExperimentConfig:
    d: int
    sigma: float
    T: float
    x0: float
    payoff: str
    strikes: Tuple[float, ...]
    methods: Tuple[MethodConfig, ...] = ()
    schedules: Tuple[ScheduleBand, ...] = ()
    trials: int = 5
    seed: int = 0
    reference: str = "exact-mc"
    reference_paths: int = 10_000_000

    def __post_init__(self):
        if self.d < 1 or not self.sigma > 0 or not self.T > 0 or not self.x0 > 0:
            raise UsageError("model needs d >= 1 and positive sigma, T, x0")
        if self.payoff not in PAYOFF_FAMILIES:
            raise UsageError(f"unknown payoff family {self.payoff!r}")
        if self.trials < 1:
            raise UsageError("trials must be >= 1")
        if self.reference not in REFERENCE_KINDS:
            raise UsageError(f"reference kind must be one of {REFERENCE_KINDS}")
        names = [m.name for m in self.methods]
        if len(set(names)) != len(names):
            raise UsageError(f"duplicate method names: {names}")
        for m in self.methods:
            if m.kind not in METHOD_KINDS:
                raise UsageError(f"method {m.name!r}: unknown kind {m.kind!r}")
            if not m.n or any(k < 1 for k in m.n):
                raise UsageError(f"method {m.name!r}: n grid must be non-empty positive integers")
            if m.optimizer not in OPTIMIZERS:
                raise UsageError(f"method {m.name!r}: unknown optimizer {m.optimizer!r}")
        if any(m.kind == "wa-sgd" for m in self.methods):
            for K in self.strikes:
                self.schedule_for(K)

    def schedule_for(self, K: float) -> ScheduleSpec:
        hits = [s for s in self.schedules if s.strikes.contains(K)]
        if len(hits) != 1:
            raise UsageError(
                f"strike {K!r} matches {len(hits)} schedule bands; exactly one is required"
            )
        return hits[0].schedule

    def method(self, name: str) -> MethodConfig:
        for m in self.methods:
            if m.name == name:
                return m
        raise UsageError(f"unknown method {name!r}; config defines {[m.name for m in self.methods]}")

    def select(self, names=None, trials=None, seed=None) -> "ExperimentConfig":
        """Copy restricted to ``names`` (in the given order) with overrides."""
        from dataclasses import replace

        methods = self.methods if names is None else tuple(self.method(n) for n in names)
        return replace(
            self,
            methods=methods,
            trials=self.trials if trials is None else int(trials),
            seed=self.seed if seed is None else int(seed),
        )


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def _floats(s):
    return tuple(float(t) for t in s.split(",") if t.strip())


def _ints(s):
    return tuple(int(t) for t in s.split(",") if t.strip())


def _bool(s):
    t = s.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise UsageError(f"not a boolean: {s!r}")


def _order(s):
    s = s.strip()
    return int(s) if re.fullmatch(r"-?\d+", s) else s


_BAND_RE = re.compile(r"^\s*([\[(])\s*([^,]+?)\s*,\s*([^\])]+?)\s*([\])])\s*$")


def parse_band(text: str) -> StrikeBand:
    m = _BAND_RE.match(text)
    if not m:
        raise UsageError(f"strike band must look like '[90, 100]' or '(100, inf)', got {text!r}")
    return StrikeBand(float(m.group(2)), float(m.group(3)), m.group(1) == "[", m.group(4) == "]")


def parse_rates(text: str) -> ScheduleSpec:
    bps = []
    for part in text.split(","):
        if not part.strip():
            continue
        try:
            upper, rate = part.split(":")
            bps.append((int(upper), float(rate)))
        except ValueError:
            raise UsageError(f"rate entries look like '600:0.1', got {part.strip()!r}") from None
    return ScheduleSpec(tuple(bps))


def format_rates(s: ScheduleSpec) -> str:
    return ", ".join(f"{u}:{r!r}" for u, r in s.breakpoints)


_SECTION_KEYS = {
    "model": {"d": int, "sigma": float, "T": float, "x0": float},
    "payoff": {"family": str, "strikes": _floats},
    "study": {"trials": int, "seed": int},
    "reference": {"kind": str, "paths": int},
}
_METHOD_KEYS = {
    "kind": str,
    "order": _order,
    "n": _ints,
    "paths": int,
    "batch": int,
    "iterations": int,
    "optimizer": str,
    "theta0": float,
    "warm_start": _bool,
    "tail_average": float,
}
_SCHEDULE_KEYS = {"strikes": parse_band, "rates": parse_rates}
_REQUIRED = {"model": ("d", "sigma", "T", "x0"), "payoff": ("family", "strikes")}


def _read_keys(section, parsers, where):
    out = {}
    for key, raw in section.items():
        if key not in parsers:
            raise UsageError(f"unknown key {key!r} in [{where}]; allowed: {sorted(parsers)}")
        try:
            out[key] = parsers[key](raw)
        except UsageError:
            raise
        except ValueError as exc:
            raise UsageError(f"bad value for {key!r} in [{where}]: {raw!r} ({exc})") from None
    return out


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise UsageError(f"config parse error: {exc}") from None

    plain, methods, schedules = {}, [], []
    for name in cp.sections():
        head, _, rest = name.partition(" ")
        rest = rest.strip()
        if name in _SECTION_KEYS:
            plain[name] = _read_keys(cp[name], _SECTION_KEYS[name], name)
        elif head == "method" and rest:
            kv = _read_keys(cp[name], _METHOD_KEYS, name)
            if "kind" not in kv or "n" not in kv:
                raise UsageError(f"[{name}] needs 'kind' and 'n'")
            methods.append(MethodConfig(name=rest, **kv))
        elif head == "schedule" and rest:
            kv = _read_keys(cp[name], _SCHEDULE_KEYS, name)
            if set(kv) != {"strikes", "rates"}:
                raise UsageError(f"[{name}] needs 'strikes' and 'rates'")
            schedules.append(ScheduleBand(rest, kv["strikes"], kv["rates"]))
        else:
            raise UsageError(f"unknown section [{name}]")
    for sec, keys in _REQUIRED.items():
        missing = [k for k in keys if k not in plain.get(sec, {})]
        if missing:
            raise UsageError(f"[{sec}] is missing {missing}")

    model, payoff = plain["model"], plain["payoff"]
    study, ref = plain.get("study", {}), plain.get("reference", {})
    return ExperimentConfig(
        d=model["d"],
        sigma=model["sigma"],
        T=model["T"],
        x0=model["x0"],
        payoff=payoff["family"],
        strikes=payoff["strikes"],
        methods=tuple(methods),
        schedules=tuple(schedules),
        trials=study.get("trials", 5),
        seed=study.get("seed", 0),
        reference=ref.get("kind", "exact-mc"),
        reference_paths=ref.get("paths", 10_000_000),
    )


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


def to_ini(cfg: ExperimentConfig) -> str:
    lines = [
        "[model]",
        f"d = {cfg.d}",
        f"sigma = {_fmt(float(cfg.sigma))}",
        f"T = {_fmt(float(cfg.T))}",
        f"x0 = {_fmt(float(cfg.x0))}",
        "",
        "[payoff]",
        f"family = {cfg.payoff}",
        "strikes = " + ", ".join(_fmt(float(k)) for k in cfg.strikes),
        "",
        "[study]",
        f"trials = {cfg.trials}",
        f"seed = {cfg.seed}",
        "",
        "[reference]",
        f"kind = {cfg.reference}",
        f"paths = {cfg.reference_paths}",
    ]
    for m in cfg.methods:
        lines += ["", f"[method {m.name}]"]
        for f in fields(MethodConfig):
            if f.name == "name":
                continue
            v = getattr(m, f.name)
            if f.name == "n":
                v = ", ".join(str(k) for k in v)
            elif isinstance(v, float):
                v = _fmt(v)
            else:
                v = _fmt(v)
            lines.append(f"{f.name} = {v}")
    for s in cfg.schedules:
        lines += ["", f"[schedule {s.name}]", f"strikes = {s.strikes}", f"rates = {format_rates(s.schedule)}"]
    return "\n".join(lines) + "\n"


# Documentation of every accepted key, used by the recipe validator and README.
CONFIG_KEYS = {
    "model": {
        "d": "state dimension",
        "sigma": "common volatility of every coordinate",
        "T": "maturity",
        "x0": "common initial value of every coordinate",
    },
    "payoff": {
        "family": f"one of {sorted(PAYOFF_FAMILIES)}",
        "strikes": "comma-separated strike grid K",
    },
    "study": {"trials": "independent trials per cell", "seed": "root seed"},
    "reference": {
        "kind": "exact-mc (explicit lognormal MC) or oracle (closed form / quadrature)",
        "paths": "paths for exact-mc references",
    },
    "method NAME": {
        "kind": f"one of {METHOD_KINDS}",
        "order": "weight order m (1, 2 or a registered plug-in tag); ignored by em-mc",
        "n": "comma-separated time-step grid",
        "paths": "Monte Carlo paths per trial (wa-mc, em-mc)",
        "batch": "mini-batch size M (wa-sgd)",
        "iterations": "iterations J (wa-sgd)",
        "optimizer": f"one of {sorted(OPTIMIZERS)} (wa-sgd)",
        "theta0": "initial parameter (wa-sgd)",
        "warm_start": "start from the first batch mean (wa-sgd)",
        "tail_average": "fraction of final iterates to average; 0 returns the last iterate",
    },
    "schedule NAME": {
        "strikes": "strike interval such as (-inf, 90), [90, 100], (100, inf)",
        "rates": "band upper bounds and rates, e.g. 600:0.1, 1200:0.01, 4000:0.001",
    },
}
