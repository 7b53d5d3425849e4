"""Scalar stochastic minimisation of the mini-batch loss
``psi_j(theta) = mean_l (theta - Y_l)^2`` with SGD or Adam.

``theta`` may also be a 1-D array of independent parameters, one per row of
a ``(P, M)`` sample matrix; every update is then applied elementwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .errors import UsageError
from .simulate import batch_mean


@dataclass(frozen=True)
class ScheduleSpec:
    """Piecewise-constant learning rate.

    ``breakpoints`` is an increasing sequence of ``(upper, rate)``; iteration
    ``j`` uses the rate of the first band with ``j <= upper`` (bands are closed
    on the right, so the interval-style ``[0,600], (600,1200], ...`` reads
    ``((600, r1), (1200, r2), ...)``).
    """

    breakpoints: Tuple[Tuple[int, float], ...]
    J: Optional[int] = None

    def __post_init__(self):
        bps = tuple((int(u), float(r)) for u, r in self.breakpoints)
        if not bps:
            raise UsageError("schedule needs at least one band")
        uppers = [u for u, _ in bps]
        if uppers[0] < 1 or any(b <= a for a, b in zip(uppers, uppers[1:])):
            raise UsageError(f"band upper bounds must be increasing and >= 1: {uppers}")
        if any(not (0 < r <= 1) for _, r in bps):
            raise UsageError(f"rates must lie in (0, 1]: {[r for _, r in bps]}")
        J = uppers[-1] if self.J is None else int(self.J)
        if not 1 <= J <= uppers[-1]:
            raise UsageError(f"schedule covers 1..{uppers[-1]} but J={J}")
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "J", J)

    @classmethod
    def constant(cls, rate: float, J: int) -> "ScheduleSpec":
        return cls(((J, rate),), J)

    def rates(self) -> np.ndarray:
        """Rates for iterations ``1..J`` as an array."""
        return np.array([lr_at(self, j) for j in range(1, self.J + 1)])


def lr_at(schedule: ScheduleSpec, j: int) -> float:
    if not 1 <= j <= schedule.J:
        raise UsageError(f"iteration {j} outside 1..{schedule.J}")
    for upper, rate in schedule.breakpoints:
        if j <= upper:
            return rate
    raise AssertionError("unreachable: schedule validated to cover J")


# Schedules used for the d=10 basket study, keyed by strike band.
D10_SCHEDULES = {
    "K<90": ScheduleSpec(((600, 0.5), (1200, 1e-2), (4000, 1e-3))),
    "90<=K<=100": ScheduleSpec(((600, 1e-1), (1200, 1e-2), (4000, 1e-3))),
    "K>100": ScheduleSpec(((600, 1e-2), (1200, 1e-3), (4000, 1e-4))),
}
D100_SCHEDULE = ScheduleSpec(((600, 0.5), (1200, 5e-2), (4000, 5e-3)))


def d10_schedule(K: float) -> ScheduleSpec:
    if K < 90:
        return D10_SCHEDULES["K<90"]
    if K <= 100:
        return D10_SCHEDULES["90<=K<=100"]
    return D10_SCHEDULES["K>100"]


@dataclass(frozen=True)
class OptimizerState:
    theta: np.ndarray | float
    j: int = 0
    m: np.ndarray | float = 0.0
    v: np.ndarray | float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def grad_loss(theta, batch_Y) -> np.ndarray | float:
    """Exact gradient ``2 (theta - mean(Y))`` of the mini-batch loss.

    ``batch_Y`` is ``(M,)`` for scalar ``theta`` or ``(P, M)`` for a
    length-``P`` parameter vector.
    """
    Y = np.asarray(batch_Y, dtype=float)
    if Y.size == 0 or Y.shape[-1] == 0:
        raise UsageError("empty batch")
    if Y.ndim == 1:
        return 2.0 * (theta - batch_mean(Y))
    means = np.array([batch_mean(row) for row in Y])
    return 2.0 * (np.asarray(theta, dtype=float) - means)


def loss(theta, batch_Y) -> float:
    Y = np.asarray(batch_Y, dtype=float)
    return batch_mean((theta - Y) ** 2)


def sgd_step(state: OptimizerState, grad, rate) -> OptimizerState:
    return replace(state, theta=state.theta - rate * grad, j=state.j + 1)


def adam_step(state: OptimizerState, grad, rate) -> OptimizerState:
    j = state.j + 1
    m = state.beta1 * state.m + (1 - state.beta1) * grad
    v = state.beta2 * state.v + (1 - state.beta2) * grad * grad
    m_hat = m / (1 - state.beta1**j)
    v_hat = v / (1 - state.beta2**j)
    theta = state.theta - rate * m_hat / (np.sqrt(v_hat) + state.eps)
    return replace(state, theta=theta, j=j, m=m, v=v)


OPTIMIZERS = {"sgd": sgd_step, "adam": adam_step}


@dataclass(frozen=True)
class TrainConfig:
    M: int = 1024
    J: int = 4000
    n: int = 4
    m: int = 2
    optimizer: str = "adam"
    schedule: ScheduleSpec = field(default_factory=lambda: D10_SCHEDULES["90<=K<=100"])
    theta0: float = 0.0
    warm_start: bool = False
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    tail_average: float = 0.0
    record_trace: bool = False

    def __post_init__(self):
        if self.M < 1 or self.J < 1:
            raise UsageError(f"M and J must be positive, got M={self.M}, J={self.J}")
        if self.optimizer not in OPTIMIZERS:
            raise UsageError(f"unknown optimizer {self.optimizer!r}; choose from {sorted(OPTIMIZERS)}")
        if self.schedule.breakpoints[-1][0] < self.J:
            raise UsageError(f"schedule ends at {self.schedule.breakpoints[-1][0]} < J={self.J}")
        if not 0 <= self.tail_average < 1:
            raise UsageError("tail_average must be a fraction in [0, 1)")


@dataclass
class MinimizationResult:
    theta: np.ndarray | float
    trace: Optional[np.ndarray] = None


def run_minimization(
    sample_source: Callable[[int], np.ndarray],
    config: TrainConfig,
    schedules: Optional[Sequence[ScheduleSpec]] = None,
) -> MinimizationResult:
    """Iterate ``j = 1..J``: draw ``Y = sample_source(j)``, take one optimiser
    step on ``grad_loss``.  Returns the last iterate (or the trailing average
    over the final ``tail_average`` fraction when that is non-zero).

    With ``schedules`` (one per parameter) the source must return ``(P, M)``
    batches and each parameter follows its own learning-rate schedule.
    """
    step = OPTIMIZERS[config.optimizer]
    J = config.J
    if schedules is None:
        rates = np.array([lr_at(config.schedule, j) for j in range(1, J + 1)])
        theta0 = float(config.theta0)
    else:
        rates = np.stack([[lr_at(s, j) for s in schedules] for j in range(1, J + 1)])
        theta0 = np.full(len(schedules), float(config.theta0))

    state = OptimizerState(theta0, beta1=config.beta1, beta2=config.beta2, eps=config.eps_adam)
    trace = [] if config.record_trace else None
    tail_start = J - int(np.floor(config.tail_average * J)) if config.tail_average else J
    tail_sum, tail_count = 0.0, 0
    for j in range(1, J + 1):
        try:
            Y = sample_source(j)
        except Exception as exc:
            exc.iteration = j
            if exc.args and isinstance(exc.args[0], str):
                exc.args = (f"iteration {j}: {exc.args[0]}",) + exc.args[1:]
            raise
        if j == 1 and config.warm_start:
            Y0 = np.asarray(Y, dtype=float)
            start = batch_mean(Y0) if Y0.ndim == 1 else np.array([batch_mean(r) for r in Y0])
            state = replace(state, theta=start)
        state = step(state, grad_loss(state.theta, Y), rates[j - 1])
        if trace is not None:
            trace.append(np.copy(state.theta))
        if j > tail_start:
            tail_sum = tail_sum + state.theta
            tail_count += 1
    theta = tail_sum / tail_count if tail_count else state.theta
    return MinimizationResult(theta, None if trace is None else np.array(trace))
