"""Exception types raised across the package."""

import numpy as np


class UsageError(ValueError):
    """Bad arguments: out-of-range indices, empty batches, unknown keys."""


class ModelError(ValueError):
    """A model or payoff could not be constructed as requested."""


class EllipticityError(ArithmeticError):
    """sigma(x) sigma(x)^T fell below the ellipticity floor at some state."""

    def __init__(self, message, state=None, step=None):
        super().__init__(message)
        self.state = None if state is None else np.asarray(state)
        self.step = step


class PathFailureError(RuntimeError):
    """One or more simulated paths produced non-finite values."""

    def __init__(self, message, indices=(), step=None):
        super().__init__(message)
        self.indices = list(indices)
        self.step = step


class QuadratureError(ArithmeticError):
    def __init__(self, message, bound=None):
        super().__init__(message)
        self.bound = bound
