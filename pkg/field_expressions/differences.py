"""
InvarLab - Central Differences
Partial-derivative stencils shared by the field classes and the invariance checks
"""

from typing import Callable

import numpy as np

from .expression import ExpressionError

DEFAULT_FD_STEP = 1e-5


class FiniteDifferenceError(Exception):
    """Raised when a difference stencil meets non-finite values."""


def scaled_step(base: float, x) -> float:
    """h = base * (1 + |x|)"""
    return float(base) * (1.0 + float(np.linalg.norm(x)))


def checked_value(value, where):
    value = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(value)):
        raise FiniteDifferenceError(f"non-finite field value at {np.asarray(where).tolist()}")
    return value


def partials(field: Callable, x, base_step: float = DEFAULT_FD_STEP) -> np.ndarray:
    """Stack of dF/dy_l at x, shape (n,) + F(x).shape."""
    x = np.asarray(x, dtype=float)
    step = scaled_step(base_step, x)
    slices = []
    for l in range(x.shape[0]):
        shift = np.zeros_like(x)
        shift[l] = step
        try:
            forward = checked_value(field(x + shift), x + shift)
            backward = checked_value(field(x - shift), x - shift)
        except (ArithmeticError, ValueError, ExpressionError) as exc:
            raise FiniteDifferenceError(f"field evaluation failed near {x.tolist()}: {exc}") from exc
        slices.append((forward - backward) / (2.0 * step))
    return np.stack(slices, axis=0)


def jacobian(field: Callable, x, base_step: float = DEFAULT_FD_STEP) -> np.ndarray:
    """J[..., l] = dF/dy_l; for a vector field J[i, l] = dF_i/dy_l."""
    return np.moveaxis(partials(field, x, base_step), 0, -1)
