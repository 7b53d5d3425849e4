"""Euler-Maruyama paths carrying a product of one-step Malliavin weights."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EllipticityError, PathFailureError, UsageError
from .model import ModelSpec, Payoff
from .rng import IncrementBatch
from .weights import get_weight


@dataclass(frozen=True)
class WeightedSample:
    terminal_state: np.ndarray
    weight_product: float
    path_meta: tuple = ()


def euler_step(model: ModelSpec, x, dW, dt: float) -> np.ndarray:
    """``x + b(x) dt + sum_k sigma_k(x) dW^k`` for one state or a batch."""
    if not dt > 0:
        raise UsageError(f"dt must be positive, got {dt}")
    x = np.asarray(x, dtype=float)
    dW = np.asarray(dW, dtype=float)
    if model.diagonal is not None:
        dg = model.diagonal
        return x + dg.b(x) * dt + dg.s(x) * dW
    return x + model.drift(x) * dt + np.einsum("...ki,...i->...k", model.diffusion(x), dW)


def propagate(model: ModelSpec, x0, increments, dt: float, order=2):
    """Run the weighted scheme on a block of paths.

    Args:
        increments: array ``(M, n, d)``.

    Returns:
        ``(terminal_states (M, d), weight_products (M,))``.  Each step's
        weight is taken at the state the step starts from.
    """
    inc = np.asarray(increments, dtype=float)
    if inc.ndim != 3 or inc.shape[2] != model.d:
        raise UsageError(f"increments must be shaped (M, n, {model.d}), got {inc.shape}")
    weight = get_weight(order)
    M, n, _ = inc.shape
    x = np.broadcast_to(np.asarray(x0, dtype=float), (M, model.d)).copy()
    wprod = np.ones(M)
    for i in range(n):
        dW = inc[:, i, :]
        if order != 1:
            try:
                wprod = wprod * weight(model, x, dW, dt)
            except EllipticityError as exc:
                raise EllipticityError(f"step {i + 1}: {exc}", state=exc.state, step=i + 1) from exc
        x = euler_step(model, x, dW, dt)
    return x, wprod


def _check_finite(Y, where=""):
    bad = np.flatnonzero(~np.isfinite(Y))
    if bad.size:
        raise PathFailureError(
            f"{bad.size} path(s) produced non-finite samples{where}: {bad[:20].tolist()}",
            indices=bad,
        )


def simulate_weighted(model, x0, payoff: Payoff, increments, dt, order=2):
    """Single path version; ``increments`` is ``(n, d)``.  Returns
    ``(WeightedSample, Y)`` with ``Y = f(X_T) * prod M``."""
    inc = np.asarray(increments, dtype=float)
    if inc.ndim != 2:
        raise UsageError(f"one path's increments must be (n, d), got {inc.shape}")
    xT, w = propagate(model, x0, inc[None], dt, order)
    Y = float(payoff(xT)[0] * w[0])
    _check_finite(np.array([Y]))
    return WeightedSample(xT[0], float(w[0])), Y


def simulate_batch(model, x0, payoff: Payoff, batch: IncrementBatch, order=2) -> np.ndarray:
    if batch.meta.d != model.d:
        raise UsageError(f"batch dimension {batch.meta.d} != model dimension {model.d}")
    return simulate_batch_multi(model, x0, [payoff], batch, order)[0]


def simulate_batch_multi(model, x0, payoffs: Sequence[Payoff], batch: IncrementBatch, order=2):
    """Y samples for several payoffs sharing the same paths, shape ``(P, M)``."""
    xT, w = propagate(model, x0, batch.data, batch.meta.dt, order)
    Y = np.stack([p(xT) * w for p in payoffs])
    _check_finite(Y, f" (trial {batch.meta.trial}, iteration {batch.meta.iteration})")
    return Y


# paths per reduction block; block sums are combined with exact rounding
REDUCE_BLOCK = 1 << 16


def batch_mean(y) -> float:
    """Canonical reduction: numpy's pairwise sum within consecutive blocks of
    ``REDUCE_BLOCK`` path-ordered samples, block sums combined by
    ``math.fsum``, divided by the sample count."""
    y = np.ascontiguousarray(y, dtype=float)
    if y.ndim != 1 or y.size == 0:
        raise UsageError("batch_mean expects a non-empty 1-D sample vector")
    if y.size <= REDUCE_BLOCK:
        return float(np.add.reduce(y) / y.size)
    sums = [np.add.reduce(y[i : i + REDUCE_BLOCK]) for i in range(0, y.size, REDUCE_BLOCK)]
    return math.fsum(sums) / y.size
