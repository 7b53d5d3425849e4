"""SDE coefficient fields, Ito-Taylor operators and payoffs.

All coefficient callables work on batches: a state array of shape ``(..., d)``
maps to ``(..., d)`` for the drift and ``(..., d, d)`` for the diffusion
matrix, whose column ``i`` is the vector field ``sigma_i``.  Field index 0 is
the drift ``V_0 = b`` and field index ``i >= 1`` is ``V_i = sigma_i``.

Derivative arrays use the layout

* first derivative of field ``j``: ``(..., d, d)`` indexed ``[component, partial]``
* second derivative of field ``j``: ``(..., d, d, d)`` indexed
  ``[component, partial_k, partial_l]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import EllipticityError, ModelError, UsageError

ArrayFn = Callable[[np.ndarray], np.ndarray]

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class DiagonalCoeffs:
    """Elementwise description of a model whose k-th drift and diffusion
    component depend on ``x_k`` only and whose diffusion matrix is diagonal.

    Each callable maps ``(..., d)`` to ``(..., d)``.
    """

    b: ArrayFn
    db: ArrayFn
    d2b: ArrayFn
    s: ArrayFn
    ds: ArrayFn
    d2s: ArrayFn


@dataclass(frozen=True)
class ModelSpec:
    d: int
    drift: ArrayFn
    diffusion: ArrayFn
    first_deriv: Optional[Callable[[int, np.ndarray], np.ndarray]] = None
    second_deriv: Optional[Callable[[int, np.ndarray], np.ndarray]] = None
    ellipticity_floor: float = 1e-10
    name: str = "custom"
    domain: str = "R^d"
    params: dict = field(default_factory=dict)
    diagonal: Optional[DiagonalCoeffs] = None

    def __post_init__(self):
        if int(self.d) < 1:
            raise ModelError(f"dimension must be positive, got {self.d}")
        if not self.ellipticity_floor > 0:
            raise ModelError("ellipticity floor must be positive")

    def field(self, j: int, x) -> np.ndarray:
        """Evaluate the vector field ``V_j`` at ``x``."""
        _check_index(j, self.d)
        x = np.asarray(x, dtype=float)
        if j == 0:
            return self.drift(x)
        return self.diffusion(x)[..., :, j - 1]

    def jacobian(self, j: int, x) -> np.ndarray:
        _check_index(j, self.d)
        x = np.asarray(x, dtype=float)
        if self.first_deriv is not None:
            return self.first_deriv(j, x)
        return fd_jacobian(lambda y: self.field(j, y), x)

    def hessian(self, j: int, x) -> np.ndarray:
        _check_index(j, self.d)
        x = np.asarray(x, dtype=float)
        if self.second_deriv is not None:
            return self.second_deriv(j, x)
        return fd_hessian(lambda y: self.field(j, y), x)

    def check_ellipticity(self, states) -> None:
        """Raise EllipticityError if ``sigma sigma^T`` drops below the floor
        at any of ``states`` (shape ``(..., d)``)."""
        states = np.asarray(states, dtype=float).reshape(-1, self.d)
        sig = self.diffusion(states)
        gram = sig @ np.swapaxes(sig, -1, -2)
        lam = np.linalg.eigvalsh(gram)[:, 0]
        bad = np.flatnonzero(~(lam >= self.ellipticity_floor))
        if bad.size:
            k = int(bad[0])
            raise EllipticityError(
                f"smallest eigenvalue of sigma sigma^T is {lam[k]:.3e} < "
                f"{self.ellipticity_floor:.3e} at probe {k}",
                state=states[k],
            )


def _check_index(j, d):
    if not (isinstance(j, (int, np.integer)) and 0 <= j <= d):
        raise UsageError(f"field index must be an integer in [0, {d}], got {j!r}")


def fd_jacobian(fn: ArrayFn, x: np.ndarray) -> np.ndarray:
    """Central-difference Jacobian ``[..., component, partial]`` of ``fn``."""
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    h = np.maximum(1.0, np.abs(x)) * _EPS ** (1 / 3)
    cols = []
    for p in range(d):
        e = np.zeros(d)
        e[p] = 1.0
        hp = h[..., p : p + 1]
        cols.append((fn(x + hp * e) - fn(x - hp * e)) / (2 * hp))
    return np.stack(cols, axis=-1)


def fd_hessian(fn: ArrayFn, x: np.ndarray) -> np.ndarray:
    """Central-difference second derivatives ``[..., component, k, l]``."""
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    # eps^(1/4) balances truncation against round-off for second differences
    h = np.maximum(1.0, np.abs(x)) * _EPS ** 0.25
    f0 = fn(x)
    out = np.empty(f0.shape + (d, d))
    for k in range(d):
        ek = np.zeros(d)
        ek[k] = 1.0
        hk = h[..., k : k + 1]
        out[..., k, k] = (fn(x + hk * ek) - 2 * f0 + fn(x - hk * ek)) / hk**2
        for l in range(k + 1, d):
            el = np.zeros(d)
            el[l] = 1.0
            hl = h[..., l : l + 1]
            v = (
                fn(x + hk * ek + hl * el)
                - fn(x + hk * ek - hl * el)
                - fn(x - hk * ek + hl * el)
                + fn(x - hk * ek - hl * el)
            ) / (4 * hk * hl)
            out[..., k, l] = v
            out[..., l, k] = v
    return out


def apply_L(model: ModelSpec, i: int, j: int, x) -> np.ndarray:
    """Return ``(L_i V_j)(x)``.

    ``L_i`` for ``i >= 1`` is the directional derivative along ``sigma_i``;
    ``L_0`` is the generator ``b . grad + 1/2 tr(sigma sigma^T hess)``.
    Works on batches of states.
    """
    _check_index(i, model.d)
    _check_index(j, model.d)
    x = np.asarray(x, dtype=float)
    jac = model.jacobian(j, x)
    if i >= 1:
        return np.einsum("...cp,...p->...c", jac, model.field(i, x))
    sig = model.diffusion(x)
    gram = sig @ np.swapaxes(sig, -1, -2)
    hess = model.hessian(j, x)
    return np.einsum("...cp,...p->...c", jac, model.drift(x)) + 0.5 * np.einsum(
        "...ckl,...kl->...c", hess, gram
    )


def black_scholes_model(d: int, sigma, ellipticity_floor: float = 1e-10) -> ModelSpec:
    """Zero-drift diagonal Black-Scholes model ``dX^i = sigma_i X^i dW^i``.

    ``sigma`` is a scalar (applied to every coordinate) or a length-``d``
    vector.  Ellipticity only holds away from the coordinate hyperplanes, so
    the model is recorded as living on the positive orthant.
    """
    d = int(d)
    if d < 1:
        raise ModelError(f"dimension must be positive, got {d}")
    sig = np.broadcast_to(np.asarray(sigma, dtype=float), (d,)).copy()
    if not np.all(sig > 0):
        raise ModelError(f"volatilities must be positive, got {sig}")
    sig.setflags(write=False)
    eye = np.eye(d)

    def drift(x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def diffusion(x):
        x = np.asarray(x, dtype=float)
        return (sig * x)[..., None, :] * eye

    def first_deriv(j, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape + (d,))
        if j >= 1:
            out[..., j - 1, j - 1] = sig[j - 1]
        return out

    def second_deriv(j, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape + (d, d))

    zeros = lambda x: np.zeros_like(np.asarray(x, dtype=float))  # noqa: E731
    diag = DiagonalCoeffs(
        b=zeros,
        db=zeros,
        d2b=zeros,
        s=lambda x: sig * np.asarray(x, dtype=float),
        ds=lambda x: np.broadcast_to(sig, np.shape(x)),
        d2s=zeros,
    )
    model = ModelSpec(
        d=d,
        drift=drift,
        diffusion=diffusion,
        first_deriv=first_deriv,
        second_deriv=second_deriv,
        ellipticity_floor=ellipticity_floor,
        name="black_scholes",
        domain="positive orthant",
        params={"sigma": sig},
        diagonal=diag,
    )
    probes = np.exp(np.random.default_rng(0).uniform(0.0, np.log(1e3), (16, d)))
    model.check_ellipticity(probes)
    return model


def is_black_scholes(model: ModelSpec) -> bool:
    return model.name == "black_scholes" and "sigma" in model.params


@dataclass(frozen=True)
class Payoff:
    """Terminal function ``f``; ``__call__`` maps states ``(..., d)`` to ``(...)``."""

    family: str
    K: float
    fn: ArrayFn = field(repr=False, compare=False)

    def __call__(self, x) -> np.ndarray:
        return self.fn(np.asarray(x, dtype=float))

    @property
    def descriptor(self) -> str:
        return f"{self.family}(K={self.K!r})"


def basket_call(K: float) -> Payoff:
    K = float(K)
    return Payoff("basket_call", K, lambda x: np.maximum(x.mean(axis=-1) - K, 0.0))


def max_call(K: float) -> Payoff:
    K = float(K)
    return Payoff("max_call", K, lambda x: np.maximum(x - K, 0.0).max(axis=-1))


def constant_payoff(c: float) -> Payoff:
    """``f = c`` everywhere; ``K`` holds the constant."""
    c = float(c)
    return Payoff("constant", c, lambda x: np.full(x.shape[:-1], c))


PAYOFF_FAMILIES = {
    "basket_call": basket_call,
    "max_call": max_call,
    "constant": constant_payoff,
}


def make_payoff(family: str, K: float) -> Payoff:
    try:
        return PAYOFF_FAMILIES[family](K)
    except KeyError:
        raise UsageError(
            f"unknown payoff family {family!r}; choose from {sorted(PAYOFF_FAMILIES)}"
        ) from None
