"""One-step Malliavin weights for the weighted Euler-Maruyama scheme.

The order-2 weight is written in terms of the contracted coefficients

    B^{i3}_{i1,i2}(x) = sum_{i4} (L_{i1} V_{i2})^{i4}(x) (sigma^{-1})^{i3 i4}(x),

for ``i1, i2`` in ``0..d`` and ``i3`` in ``1..d`` (stored zero-based in the
last axis).  With ``W^0 := dt`` the first correction is

    1/(2 dt) sum B^{i3}_{i1,i2} (W^{i1} W^{i2} W^{i3} - dt W^{i3} [i1=i2!=0]
                                 - dt W^{i1} [i2=i3!=0] - dt W^{i2} [i1=i3!=0])

and the second, with ``G_{i1,i2} = sum_{i3} B^{i3}_{i1,i2} W^{i3}`` and
``i1, i2`` restricted to ``1..d``, is

    1/4 sum_{i1,i2} (G_{i1,i2}^2 - dt sum_{i3} (B^{i3}_{i1,i2})^2).

Every function accepts a batch of states ``(..., d)`` with matching
increments and returns weights of shape ``(...)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, Hashable

import numpy as np

from .errors import EllipticityError, UsageError
from .model import ModelSpec, apply_L

WeightFn = Callable[[ModelSpec, np.ndarray, np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class WeightCoeffs:
    B: np.ndarray  # (..., d+1, d+1, d)
    x: np.ndarray
    inv_sigma: np.ndarray


def weight_order1(x, dW=None, dt=None) -> np.ndarray:
    """Euler-Maruyama weight: identically one."""
    x = np.asarray(x, dtype=float)
    return np.ones(x.shape[:-1]) if x.ndim > 1 else np.float64(1.0)


def _sigma_inverse(model: ModelSpec, x: np.ndarray) -> np.ndarray:
    sig = model.diffusion(x)
    gram = sig @ np.swapaxes(sig, -1, -2)
    lam = np.linalg.eigvalsh(gram)[..., 0]
    bad = ~(lam >= model.ellipticity_floor)
    if np.any(bad):
        idx = np.argwhere(bad)[0]
        raise EllipticityError(
            f"sigma(x) is not invertible within the ellipticity floor "
            f"(min eigenvalue {lam[tuple(idx)]:.3e})",
            state=x[tuple(idx)],
        )
    eye = np.broadcast_to(np.eye(model.d), sig.shape)
    return np.linalg.solve(sig, eye)


def _lv_tensor(model: ModelSpec, x: np.ndarray) -> np.ndarray:
    """All ``L_{i1} V_{i2}`` at once, shape ``(..., d+1, d+1, d)``."""
    d = model.d
    sig = model.diffusion(x)
    b = model.drift(x)
    gram = sig @ np.swapaxes(sig, -1, -2)
    jac = np.stack([model.jacobian(j, x) for j in range(d + 1)], axis=-3)
    hess = np.stack([model.hessian(j, x) for j in range(d + 1)], axis=-4)
    out = np.empty(x.shape[:-1] + (d + 1, d + 1, d))
    out[..., 0, :, :] = np.einsum("...jcp,...p->...jc", jac, b) + 0.5 * np.einsum(
        "...jckl,...kl->...jc", hess, gram
    )
    # sig[..., p, i] is component p of sigma_i
    out[..., 1:, :, :] = np.einsum("...jcp,...pi->...ijc", jac, sig)
    return out


def precompute_coeffs(model: ModelSpec, x) -> WeightCoeffs:
    x = np.asarray(x, dtype=float)
    inv = _sigma_inverse(model, x)
    lv = _lv_tensor(model, x)
    B = np.einsum("...ab,...ijb->...ija", inv, lv)
    return WeightCoeffs(B=B, x=x, inv_sigma=inv)


def weight_order2(coeffs: WeightCoeffs, dW, dt: float) -> np.ndarray:
    """Order-2 weight from precomputed coefficients (factored evaluation)."""
    if not dt > 0:
        raise UsageError(f"dt must be positive, got {dt}")
    B = coeffs.B
    dW = np.asarray(dW, dtype=float)
    w_ext = np.concatenate([np.full(dW.shape[:-1] + (1,), float(dt)), dW], axis=-1)
    P = np.einsum("...ijk,...k->...ij", B, dW)
    cubic = np.einsum("...ij,...i,...j->...", P, w_ext, w_ext)
    comp12 = np.trace(P[..., 1:, 1:], axis1=-2, axis2=-1)
    # i2 = i3 = k and i1 = i3 = k contractions, k >= 1
    diag23 = np.diagonal(B[..., :, 1:, :], axis1=-2, axis2=-1).sum(axis=-1)
    diag13 = np.diagonal(B[..., 1:, :, :], axis1=-3, axis2=-1).sum(axis=-1)
    comp23 = np.einsum("...i,...i->...", diag23, w_ext)
    comp13 = np.einsum("...i,...i->...", diag13, w_ext)
    first = (cubic - dt * (comp12 + comp23 + comp13)) / (2 * dt)
    G = P[..., 1:, 1:]
    second = 0.25 * (
        np.sum(G**2, axis=(-2, -1)) - dt * np.sum(B[..., 1:, 1:, :] ** 2, axis=(-3, -2, -1))
    )
    return 1.0 + first + second


def weight_order2_diagonal(model: ModelSpec, x, dW, dt: float) -> np.ndarray:
    """Order-2 weight for models with diagonal, coordinate-separable
    coefficients; only ``B^k_{k,k}``, ``B^k_{0,k}``, ``B^k_{k,0}`` and
    ``B^k_{0,0}`` can be non-zero, so the cost is O(d)."""
    if not dt > 0:
        raise UsageError(f"dt must be positive, got {dt}")
    dg = model.diagonal
    x = np.asarray(x, dtype=float)
    W = np.asarray(dW, dtype=float)
    s = dg.s(x)
    if np.any(~(s * s >= model.ellipticity_floor)):
        idx = np.argwhere(~(s * s >= model.ellipticity_floor))[0]
        raise EllipticityError(
            "diagonal diffusion entry below the ellipticity floor", state=x[tuple(idx[:-1])]
        )
    b, db, d2b, ds, d2s = dg.b(x), dg.db(x), dg.d2b(x), dg.ds(x), dg.d2s(x)
    a = ds * s / s
    p = (ds * b + 0.5 * s * s * d2s) / s
    q = db * s / s
    r = (db * b + 0.5 * s * s * d2b) / s
    cubic = W * (W * W - 3 * dt)
    quad = W * W - dt
    terms = a * cubic / (2 * dt) + (0.5 * (p + q) + 0.25 * a * a) * quad + 0.5 * r * dt * W
    return 1.0 + terms.sum(axis=-1)


def weight_order2_naive(model: ModelSpec, x, dW, dt: float) -> float:
    """Direct index-by-index transcription of the order-2 weight for a single
    state.  O(d^6); meant as a reference for small ``d``."""
    if not dt > 0:
        raise UsageError(f"dt must be positive, got {dt}")
    x = np.asarray(x, dtype=float)
    dW = np.asarray(dW, dtype=float)
    d = model.d
    inv = _sigma_inverse(model, x)
    LV = [[apply_L(model, i1, i2, x) for i2 in range(d + 1)] for i1 in range(d + 1)]
    W = [float(dt)] + [float(w) for w in dW]
    t = float(dt)

    first = 0.0
    for i1 in range(d + 1):
        for i2 in range(d + 1):
            for i3 in range(1, d + 1):
                for i4 in range(1, d + 1):
                    h = W[i1] * W[i2] * W[i3]
                    if i1 == i2 and i1 != 0:
                        h -= t * W[i3]
                    if i2 == i3:
                        h -= t * W[i1]
                    if i1 == i3:
                        h -= t * W[i2]
                    first += LV[i1][i2][i4 - 1] * inv[i3 - 1, i4 - 1] * h / (2 * t)

    second = 0.0
    rng1 = range(1, d + 1)
    for i1 in rng1:
        for i2 in rng1:
            for i3 in rng1:
                for i4 in rng1:
                    c34 = LV[i1][i2][i4 - 1] * inv[i3 - 1, i4 - 1]
                    if c34 == 0.0:
                        continue
                    for i5 in rng1:
                        for i6 in rng1:
                            h = W[i3] * W[i5] - (t if i3 == i5 else 0.0)
                            second += 0.25 * c34 * LV[i1][i2][i6 - 1] * inv[i5 - 1, i6 - 1] * h
    return 1.0 + first + second


def _order1(model, x, dW, dt):
    return weight_order1(np.asarray(x, dtype=float).reshape(-1, model.d)).reshape(np.shape(x)[:-1])


def _order2(model, x, dW, dt):
    if model.diagonal is not None:
        return weight_order2_diagonal(model, x, dW, dt)
    return weight_order2(precompute_coeffs(model, x), dW, dt)


_REGISTRY: Dict[Hashable, WeightFn] = {1: _order1, 2: _order2}


def register_weight(tag: Hashable, fn: WeightFn) -> None:
    """Register a batch weight ``fn(model, x, dW, dt) -> (...)`` under ``tag``."""
    if tag in (1, 2):
        raise UsageError(f"weight order {tag} is built in and cannot be replaced")
    _REGISTRY[tag] = fn


def unregister_weight(tag: Hashable) -> None:
    if tag in (1, 2):
        raise UsageError(f"weight order {tag} is built in")
    _REGISTRY.pop(tag, None)


def get_weight(tag: Hashable) -> WeightFn:
    try:
        return _REGISTRY[tag]
    except KeyError:
        hint = " (no order-3 weight ships; register one with register_weight)" if tag == 3 else ""
        raise UsageError(f"no weight registered for order {tag!r}{hint}") from None


def registered_orders():
    return list(_REGISTRY)
