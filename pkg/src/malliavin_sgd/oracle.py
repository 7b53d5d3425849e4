"""Reference prices for zero-rate lognormal assets."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate, special

from .errors import QuadratureError, UsageError


@dataclass(frozen=True)
class OraclePrice:
    value: float
    method: str
    error_bound: Optional[float] = None


def normal_cdf(z):
    """Standard normal CDF (erfc-based, ~1e-16 relative accuracy)."""
    return special.ndtr(z)


def _check_positive(**kw):
    for name, v in kw.items():
        if not (np.isfinite(v) and v > 0):
            raise UsageError(f"{name} must be positive and finite, got {v!r}")


def bs_call(x0: float, K: float, sigma: float, T: float) -> OraclePrice:
    _check_positive(x0=x0, K=K, sigma=sigma, T=T)
    vol = sigma * math.sqrt(T)
    d1 = (math.log(x0 / K) + 0.5 * vol * vol) / vol
    d2 = d1 - vol
    return OraclePrice(float(x0 * normal_cdf(d1) - K * normal_cdf(d2)), "closed-form")


def max_call_iid(
    x0: float, K: float, sigma: float, T: float, d: int, rtol: float = 1e-9
) -> OraclePrice:
    """``E[(max_i X_T^i - K)^+]`` for ``d`` i.i.d. driftless lognormal assets.

    Computed as ``int_K^inf (1 - F(y)^d) dy`` after the substitution
    ``y = x0 exp(sigma sqrt(T) z - sigma^2 T / 2)`` (so ``F(y) = Phi(z)``),
    with adaptive Gauss-Kronrod on ``[z_K, z_max]`` and an analytic bound on
    the truncated tail.
    """
    _check_positive(x0=x0, K=K, sigma=sigma, T=T)
    d = int(d)
    if d < 1:
        raise UsageError(f"d must be >= 1, got {d}")
    vol = sigma * math.sqrt(T)
    zK = (math.log(K / x0) + 0.5 * vol * vol) / vol
    z_max = max(zK, vol) + 12.0
    # beyond z_max: sum of single-asset tails bounds the max-call tail
    tail = d * x0 * float(normal_cdf(vol - z_max))

    def integrand(z):
        survival = -math.expm1(d * float(special.log_ndtr(z)))
        return survival * x0 * math.exp(vol * z - 0.5 * vol * vol) * vol

    # the bulk of the mass sits where Phi(z)^d crosses 1/2
    z_mid = float(special.ndtri(0.5 ** (1.0 / d)))
    points = [p for p in (z_mid, 0.0) if zK < p < z_max]
    value, abserr = integrate.quad(
        integrand, zK, z_max, points=points or None, epsabs=0.0, epsrel=rtol, limit=500
    )
    bound = abserr + tail
    if not bound <= max(1e-4 * value, 1e-12):
        raise QuadratureError(
            f"max-call quadrature did not reach 1e-4 relative accuracy (bound {bound:.3e})",
            bound=bound,
        )
    return OraclePrice(float(value), "quadrature", float(bound))
