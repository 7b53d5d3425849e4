"""Convergence studies over (method, K, n, trial) cells."""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import UsageError
from ..estimate import (
    estimate_em_mc_multi,
    estimate_exact_gbm_mc_multi,
    estimate_wa_mc_multi,
    estimate_wa_sgd_multi,
)
from ..model import black_scholes_model, make_payoff
from ..optimize import TrainConfig
from ..oracle import bs_call, max_call_iid
from ..simulate import batch_mean
from .config import ExperimentConfig, MethodConfig

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrialRow:
    method: str
    K: float
    n: int
    trial: int
    value: float
    std_err: float
    seed: int


@dataclass(frozen=True)
class Aggregate:
    mean: float
    spread: float
    se: float
    trials: int


@dataclass(frozen=True)
class ErrorSeries:
    method: str
    k: float
    n: Tuple[int, ...]
    error: Tuple[float, ...]
    se: Tuple[float, ...]
    tie_break: str = "smallest K among argmax ties"


@dataclass(frozen=True)
class FitResult:
    slope: float
    used: Tuple[int, ...]
    excluded: Tuple[int, ...]
    note: str = ""


@dataclass
class ConvergenceReport:
    config: ExperimentConfig
    rows: List[TrialRow] = field(default_factory=list)
    refs: Dict[float, Tuple[float, float]] = field(default_factory=dict)
    failures: List[str] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return not self.failures

    @property
    def methods(self) -> List[str]:
        seen = []
        for m in [mc.name for mc in self.config.methods] + [r.method for r in self.rows]:
            if m not in seen:
                seen.append(m)
        return seen

    def aggregates(self) -> Dict[Tuple[str, float, int], Aggregate]:
        return aggregate_rows(self.rows)

    def errors(self, method: str) -> ErrorSeries:
        return error_metric(self, method)

    def fit(self, method: str, exclude_unresolved: bool = True) -> FitResult:
        series = self.errors(method)
        return fit_order(series.n, series.error, series.se if exclude_unresolved else None)


def aggregate_rows(rows: Sequence[TrialRow]) -> Dict[Tuple[str, float, int], Aggregate]:
    """Per-cell mean over trials (rows taken in trial order), the sample
    standard deviation of the trial values, and the standard error of the
    mean: ``sqrt(sum se_t^2) / trials`` when every trial carries a standard
    error, else ``spread / sqrt(trials)``."""
    cells: Dict[Tuple[str, float, int], List[TrialRow]] = {}
    for r in rows:
        cells.setdefault((r.method, r.K, r.n), []).append(r)
    out = {}
    for key, rs in cells.items():
        rs = sorted(rs, key=lambda r: r.trial)
        vals = np.array([r.value for r in rs])
        ses = np.array([r.std_err for r in rs])
        t = len(rs)
        mean = batch_mean(vals)
        spread = float(np.std(vals, ddof=1)) if t > 1 else 0.0
        if np.all(np.isfinite(ses)):
            se = math.sqrt(float(np.sum(ses * ses))) / t
        else:
            se = spread / math.sqrt(t)
        out[key] = Aggregate(mean, spread, se, t)
    return out


def error_metric(report: ConvergenceReport, method: str) -> ErrorSeries:
    """Worst-strike error series: pick ``k = argmax_K |mean(K, 1) - ref(K)|``
    (ties go to the smaller K) and return ``|mean(k, n) - ref(k)|`` over the
    method's n grid."""
    agg = report.aggregates()
    cells = {(K, n): a for (m, K, n), a in agg.items() if m == method and np.isfinite(a.mean)}
    base = sorted(K for (K, n) in cells if n == 1)
    if not base:
        raise UsageError(f"method {method!r} has no n=1 cells; the worst strike is undefined")
    missing = [K for K in base if K not in report.refs]
    if missing:
        raise UsageError(f"no reference value for strikes {missing}")
    worst, k = -1.0, None
    for K in base:
        e = abs(cells[(K, 1)].mean - report.refs[K][0])
        if e > worst:
            worst, k = e, K
    ref, ref_err = report.refs[k]
    ns = sorted(n for (K, n) in cells if K == k)
    err = tuple(abs(cells[(k, n)].mean - ref) for n in ns)
    se = tuple(math.hypot(cells[(k, n)].se, ref_err) for n in ns)
    return ErrorSeries(method, k, tuple(ns), err, se)


def fit_order(n, errors, se=None, resolve: float = 3.0) -> FitResult:
    """Negated least-squares slope of ``log(error)`` against ``log(n)``.

    Zero errors are dropped.  When ``se`` is given, points with
    ``error < resolve * se`` are dropped as statistically unresolved.
    """
    n = np.asarray(n, dtype=float)
    e = np.asarray(errors, dtype=float)
    keep = e > 0
    notes = []
    if np.any(~keep):
        notes.append("zero-error points excluded")
    if se is not None:
        resolved = e >= resolve * np.asarray(se, dtype=float)
        if np.any(keep & ~resolved):
            notes.append(f"points below {resolve:g} standard errors excluded")
        keep &= resolved
    used = tuple(int(v) for v in n[keep])
    excluded = tuple(int(v) for v in n[~keep])
    if keep.sum() < 2:
        raise UsageError(f"need at least 2 usable points to fit an order, have {used}")
    slope = np.polyfit(np.log(n[keep]), np.log(e[keep]), 1)[0]
    return FitResult(float(-slope), used, excluded, "; ".join(notes))


def derive_seed(root: int, *parts) -> int:
    """Stable 63-bit seed from the root seed and a tag."""
    tag = "|".join([str(int(root))] + [str(p) for p in parts]).encode()
    return int.from_bytes(hashlib.blake2b(tag, digest_size=8).digest(), "big") >> 1


def _payoffs(cfg: ExperimentConfig):
    return [make_payoff(cfg.payoff, K) for K in cfg.strikes]


def compute_references(cfg: ExperimentConfig) -> Dict[float, Tuple[float, float]]:
    model = black_scholes_model(cfg.d, cfg.sigma)
    x0 = np.full(cfg.d, float(cfg.x0))
    if cfg.reference == "exact-mc":
        seed = derive_seed(cfg.seed, "reference")
        res = estimate_exact_gbm_mc_multi(model, x0, _payoffs(cfg), cfg.T, cfg.reference_paths, seed)
        return {K: (r.value, r.std_err) for K, r in zip(cfg.strikes, res)}
    refs = {}
    for K in cfg.strikes:
        if cfg.payoff == "max_call" or (cfg.payoff == "basket_call" and cfg.d == 1):
            o = max_call_iid(cfg.x0, K, cfg.sigma, cfg.T, cfg.d) if cfg.payoff == "max_call" \
                else bs_call(cfg.x0, K, cfg.sigma, cfg.T)
            refs[K] = (o.value, o.error_bound or 0.0)
        elif cfg.payoff == "constant":
            refs[K] = (float(K), 0.0)
        else:
            raise UsageError(f"no closed-form oracle for {cfg.payoff} with d={cfg.d}; use exact-mc")
    return refs


def _run_cell(cfg, method: MethodConfig, model, x0, payoffs, n, trial, seed):
    if method.kind == "wa-mc":
        return estimate_wa_mc_multi(model, x0, payoffs, cfg.T, n, method.order, method.paths, seed, trial)
    if method.kind == "em-mc":
        return estimate_em_mc_multi(model, x0, payoffs, cfg.T, n, method.paths, seed, trial)
    schedules = [cfg.schedule_for(K) for K in cfg.strikes]
    train = TrainConfig(
        M=method.batch,
        J=method.iterations,
        n=n,
        m=method.order,
        optimizer=method.optimizer,
        schedule=schedules[0],
        theta0=method.theta0,
        warm_start=method.warm_start,
        tail_average=method.tail_average,
    )
    return estimate_wa_sgd_multi(model, x0, payoffs, cfg.T, n, method.order, train, seed, trial, schedules)


def _cell_job(cfg: ExperimentConfig, method: MethodConfig, n: int, trial: int, seed: int):
    model = black_scholes_model(cfg.d, cfg.sigma)
    x0 = np.full(cfg.d, float(cfg.x0))
    return _run_cell(cfg, method, model, x0, _payoffs(cfg), n, trial, seed)


def run_study(cfg: ExperimentConfig, references=None, workers: int = 1) -> ConvergenceReport:
    """Run every (method, n, trial) cell; all strikes of a cell share paths.

    Cell seeds depend on (root seed, n) only, so methods at the same n see
    common random numbers; trials use distinct keys of the same seed.  A
    failing cell is logged in ``report.failures`` and the study continues.
    With ``workers > 1`` cells run in a process pool; rows are still
    collected in (method, n, trial) order, so output does not depend on it.
    """
    if workers < 1:
        raise UsageError(f"workers must be >= 1, got {workers}")
    report = ConvergenceReport(cfg)
    report.refs = dict(references) if references is not None else compute_references(cfg)
    jobs = [
        (method, n, trial, derive_seed(cfg.seed, f"n={n}"))
        for method in cfg.methods
        for n in method.n
        for trial in range(cfg.trials)
    ]

    def run_inline(job):
        method, n, trial, seed = job
        log.info("cell method=%s n=%d trial=%d", method.name, n, trial)
        return _cell_job(cfg, method, n, trial, seed)

    if workers == 1:
        outcomes = []
        for job in jobs:
            try:
                outcomes.append(run_inline(job))
            except Exception as exc:  # recorded, study continues
                outcomes.append(exc)
    else:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_cell_job, cfg, *job) for job in jobs]
            outcomes = []
            for f in futures:
                try:
                    outcomes.append(f.result())
                except Exception as exc:
                    outcomes.append(exc)

    for (method, n, trial, seed), res in zip(jobs, outcomes):
        if isinstance(res, Exception):
            msg = f"{method.name} n={n} trial={trial}: {type(res).__name__}: {res}"
            log.warning("cell failed: %s", msg)
            report.failures.append(msg)
            continue
        for K, r in zip(cfg.strikes, res):
            se = r.std_err if r.std_err is not None else float("nan")
            report.rows.append(TrialRow(method.name, float(K), n, trial, r.value, se, seed))
    return report
