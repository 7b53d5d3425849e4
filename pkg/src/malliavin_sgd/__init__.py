"""High-dimensional expectations E[f(X_T)] through Euler-Maruyama paths with
Malliavin weights, estimated by plain Monte Carlo or by stochastic weighted
minimisation with SGD / Adam."""

from .errors import EllipticityError, ModelError, PathFailureError, QuadratureError, UsageError
from .estimate import (
    EstimateResult,
    estimate_em_mc,
    estimate_exact_gbm_mc,
    estimate_wa_mc,
    estimate_wa_sgd,
)
from .model import ModelSpec, Payoff, apply_L, basket_call, black_scholes_model, max_call
from .optimize import ScheduleSpec, TrainConfig, lr_at, run_minimization
from .oracle import bs_call, max_call_iid
from .rng import IncrementBatch, sample_increments
from .simulate import euler_step, simulate_batch, simulate_weighted
from .weights import (
    precompute_coeffs,
    register_weight,
    weight_order1,
    weight_order2,
    weight_order2_naive,
)

__version__ = "0.1.0"
