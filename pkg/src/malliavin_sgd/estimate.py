"""Estimators of ``P_T f(x0) = E[f(X_T^{x0})]``.

* ``WA-SGD``: weighted samples fed to SGD/Adam on the quadratic loss; the
  estimate is the last iterate.
* ``WA-MC``: plain mean of the weighted samples.
* ``EM-MC``: plain Euler-Maruyama Monte Carlo (the ``m = 1`` case).
* ``EXACT-MC``: Monte Carlo on the explicit lognormal solution, for the
  diagonal Black-Scholes model only.

The ``*_multi`` variants price several payoffs on shared paths; each entry
of their output is identical to the corresponding single-payoff call with
the same seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import UsageError
from .model import ModelSpec, Payoff, is_black_scholes
from .optimize import ScheduleSpec, TrainConfig, run_minimization
from .rng import NORMAL_METHOD, iter_blocks, sample_increments, standard_normals
from .simulate import REDUCE_BLOCK, batch_mean, simulate_batch_multi

# normals held in memory per generation chunk
_CHUNK_BUDGET = 1 << 22


@dataclass(frozen=True)
class EstimateResult:
    value: float
    method: str
    settings: dict = field(default_factory=dict)
    std_err: Optional[float] = None


def _chunk(n, d):
    return max(1, _CHUNK_BUDGET // (n * d))


def _check_mc(n, T, paths):
    if paths < 1:
        raise UsageError(f"paths must be >= 1, got {paths}")
    if n < 1 or not T > 0:
        raise UsageError(f"need n >= 1 and T > 0, got n={n}, T={T}")


def streamed_stats(sample_fn, P, paths, chunk):
    """Means and standard errors of ``P`` sample streams of length ``paths``.

    ``sample_fn(offset, size)`` returns the ``(P, size)`` samples of paths
    ``offset .. offset+size-1``.  Means follow the ``batch_mean`` reduction
    order exactly; variances are merged blockwise (Chan et al.), so memory
    stays bounded by one reduction block.
    """
    sums = [[] for _ in range(P)]
    count, mean, m2 = 0, np.zeros(P), np.zeros(P)
    for off in range(0, paths, REDUCE_BLOCK):
        size = min(REDUCE_BLOCK, paths - off)
        Y = np.empty((P, size))
        for o, s in iter_blocks(size, chunk):
            Y[:, o : o + s] = sample_fn(off + o, s)
        bsum = np.array([np.add.reduce(row) for row in Y])
        for k in range(P):
            sums[k].append(bsum[k])
        bmean = bsum / size
        bm2 = np.array([np.add.reduce((row - mu) ** 2) for row, mu in zip(Y, bmean)])
        total = count + size
        delta = bmean - mean
        mean = mean + delta * size / total
        m2 = m2 + bm2 + delta * delta * count * size / total
        count = total
    means = [math.fsum(sk) / paths for sk in sums]
    if paths < 2:
        return means, [float("nan")] * P
    return means, [float(math.sqrt(v / (paths - 1) / paths)) for v in m2]


def weighted_samples(model, x0, payoffs, T, n, m, paths, seed, trial=0, iteration=0):
    """All Y samples ``(P, paths)`` of the weighted scheme (kept in memory)."""
    _check_mc(n, T, paths)
    dt = T / n
    out = np.empty((len(payoffs), paths))
    for off, size in iter_blocks(paths, _chunk(n, model.d)):
        batch = sample_increments(seed, trial, iteration, size, n, model.d, dt, path_offset=off)
        out[:, off : off + size] = simulate_batch_multi(model, x0, payoffs, batch, m)
    return out


def _mc_multi(tag, model, x0, payoffs, T, n, m, paths, seed, trial):
    _check_mc(n, T, paths)
    dt = T / n

    def sample(off, size):
        batch = sample_increments(seed, trial, 0, size, n, model.d, dt, path_offset=off)
        return simulate_batch_multi(model, x0, payoffs, batch, m)

    means, ses = streamed_stats(sample, len(payoffs), paths, _chunk(n, model.d))
    res = []
    for p, value, se in zip(payoffs, means, ses):
        settings = dict(
            payoff=p.descriptor, T=T, n=n, m=m, paths=paths, seed=seed, trial=trial,
            normals=NORMAL_METHOD,
        )
        res.append(EstimateResult(value, tag, settings, se))
    return res


def estimate_wa_mc_multi(model, x0, payoffs, T, n, m, paths, seed, trial=0):
    return _mc_multi("WA-MC", model, x0, payoffs, T, n, m, paths, seed, trial)


def estimate_wa_mc(model, x0, payoff, T, n, m, paths, seed, trial=0) -> EstimateResult:
    return estimate_wa_mc_multi(model, x0, [payoff], T, n, m, paths, seed, trial)[0]


def estimate_em_mc_multi(model, x0, payoffs, T, n, paths, seed, trial=0):
    return _mc_multi("EM-MC", model, x0, payoffs, T, n, 1, paths, seed, trial)


def estimate_em_mc(model, x0, payoff, T, n, paths, seed, trial=0) -> EstimateResult:
    return estimate_em_mc_multi(model, x0, [payoff], T, n, paths, seed, trial)[0]


def gbm_terminal(model: ModelSpec, x0, W_T, T: float) -> np.ndarray:
    """``x0 exp(-sigma^2 T / 2 + sigma W_T)`` coordinatewise."""
    if not is_black_scholes(model):
        raise UsageError("the explicit solution is only available for the Black-Scholes model")
    sig = model.params["sigma"]
    return np.asarray(x0, dtype=float) * np.exp(-0.5 * sig * sig * T + sig * np.asarray(W_T))


def estimate_exact_gbm_mc_multi(model, x0, payoffs, T, paths, seed, trial=0):
    if not is_black_scholes(model):
        raise UsageError(f"exact simulation needs the Black-Scholes model, got {model.name!r}")
    _check_mc(1, T, paths)

    def sample(off, size):
        W = standard_normals(seed, trial, 0, size, 1, model.d, path_offset=off)[:, 0, :]
        xT = gbm_terminal(model, x0, W * math.sqrt(T), T)
        return np.stack([p(xT) for p in payoffs])

    means, ses = streamed_stats(sample, len(payoffs), paths, _chunk(1, model.d))
    res = []
    for p, value, se in zip(payoffs, means, ses):
        settings = dict(payoff=p.descriptor, T=T, paths=paths, seed=seed, trial=trial,
                        normals=NORMAL_METHOD)
        res.append(EstimateResult(value, "EXACT-MC", settings, se))
    return res


def estimate_exact_gbm_mc(model, x0, payoff, T, paths, seed, trial=0) -> EstimateResult:
    return estimate_exact_gbm_mc_multi(model, x0, [payoff], T, paths, seed, trial)[0]


def estimate_wa_sgd_multi(
    model,
    x0,
    payoffs: Sequence[Payoff],
    T: float,
    n: int,
    m,
    train: TrainConfig,
    seed: int,
    trial: int = 0,
    schedules: Optional[Sequence[ScheduleSpec]] = None,
):
    """Weighted minimisation for several payoffs on shared batches.
    ``schedules`` gives one learning-rate schedule per payoff (default:
    ``train.schedule`` for all).  Iteration ``j`` draws its batch from
    key ``(seed, trial, j)``."""
    if n < 1 or not T > 0:
        raise UsageError(f"need n >= 1 and T > 0, got n={n}, T={T}")
    dt = T / n
    schedules = list(schedules) if schedules is not None else [train.schedule] * len(payoffs)
    if len(schedules) != len(payoffs):
        raise UsageError("one schedule per payoff is required")

    def source(j):
        batch = sample_increments(seed, trial, j, train.M, n, model.d, dt)
        return simulate_batch_multi(model, x0, payoffs, batch, m)

    result = run_minimization(source, replace(train, n=n, m=m), schedules)
    thetas = np.atleast_1d(result.theta)
    out = []
    for k, (p, s) in enumerate(zip(payoffs, schedules)):
        settings = dict(
            payoff=p.descriptor, T=T, n=n, m=m, M=train.M, J=train.J, seed=seed, trial=trial,
            optimizer=train.optimizer, schedule=s.breakpoints, theta0=train.theta0,
            warm_start=train.warm_start, tail_average=train.tail_average, normals=NORMAL_METHOD,
        )
        if result.trace is not None:
            settings["trace"] = result.trace[:, k]
        out.append(EstimateResult(float(thetas[k]), "WA-SGD", settings, None))
    return out


def estimate_wa_sgd(model, x0, payoff, T, n, m, train: TrainConfig, seed, trial=0) -> EstimateResult:
    return estimate_wa_sgd_multi(model, x0, [payoff], T, n, m, train, seed, trial)[0]


def combined_se(*errors) -> float:
    return math.sqrt(sum(e * e for e in errors if e is not None and np.isfinite(e)))


def trial_summary(values):
    """Mean, sample spread and standard error of the mean over trials."""
    v = np.asarray(values, dtype=float)
    mean = batch_mean(v)
    if v.size < 2:
        return mean, 0.0, 0.0
    spread = float(np.std(v, ddof=1))
    return mean, spread, spread / math.sqrt(v.size)
