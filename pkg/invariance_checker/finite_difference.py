"""
InvarLab - Finite Differences
Gradients and Hessians of test functions on top of the field stencils, step h = base * (1 + |x|)
"""

from typing import Callable

import numpy as np

from field_expressions import ExpressionError
from field_expressions.differences import (
    FiniteDifferenceError,
    checked_value,
    jacobian,
    partials,
    scaled_step,
)

__all__ = ['FiniteDifferenceError', 'partials', 'jacobian', 'gradient', 'hessian', 'scaled_step']


def gradient(function: Callable, x, base_step: float) -> np.ndarray:
    return partials(lambda y: np.asarray(function(y), dtype=float), x, base_step)


def hessian(function: Callable, x, base_step: float) -> np.ndarray:
    """Symmetric four-point central-difference Hessian."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    step = scaled_step(base_step, x)
    basis = np.eye(n) * step

    def value(y):
        try:
            return float(checked_value(function(y), y))
        except (ArithmeticError, ValueError, ExpressionError) as exc:
            raise FiniteDifferenceError(f"function evaluation failed near {x.tolist()}: {exc}") from exc

    out = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            ei, ej = basis[i], basis[j]
            entry = (value(x + ei + ej) - value(x + ei - ej)
                     - value(x - ei + ej) + value(x - ei - ej)) / (4.0 * step * step)
            out[i, j] = out[j, i] = entry
    return out
