"""
InvarLab - Parametrized Manifolds
Submanifolds (with boundary) given by a chart phi over a box of parameters
"""

from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .set_oracle import SetGeometryError


class RankDeficientJacobianError(SetGeometryError):
    def __init__(self, params, rank, expected):
        self.params = np.asarray(params, dtype=float)
        self.rank = rank
        super().__init__(
            f"chart Jacobian at {self.params.tolist()} has rank {rank}, expected {expected}"
        )


class ParametrizedManifold:
    """Image of phi: R^m (optionally boxed by bounds) -> R^n."""

    def __init__(self, parametrization: Callable, param_dim: int, ambient_dim: int,
                 bounds: Optional[Sequence[Tuple[Optional[float], Optional[float]]]] = None,
                 jacobian: Optional[Callable] = None, fd_step: float = 1e-6):
        self.parametrization = parametrization
        self.param_dim = int(param_dim)
        self.ambient_dim = int(ambient_dim)
        self.bounds = list(bounds) if bounds is not None else [(None, None)] * self.param_dim
        if len(self.bounds) != self.param_dim:
            raise SetGeometryError("one (low, high) bound pair is needed per parameter")
        self.jacobian_callback = jacobian
        self.fd_step = float(fd_step)

    def point(self, params) -> np.ndarray:
        params = np.asarray(params, dtype=float).reshape(self.param_dim)
        return np.asarray(self.parametrization(params), dtype=float).reshape(self.ambient_dim)

    def jacobian(self, params) -> np.ndarray:
        """Dphi(y) as an (n, m) matrix, analytic when a callback was given."""
        params = np.asarray(params, dtype=float).reshape(self.param_dim)
        if self.jacobian_callback is not None:
            return np.asarray(self.jacobian_callback(params), dtype=float).reshape(
                self.ambient_dim, self.param_dim)
        step = self.fd_step * (1.0 + np.linalg.norm(params))
        columns = []
        for i in range(self.param_dim):
            shift = np.zeros(self.param_dim)
            shift[i] = step
            columns.append((self.point(params + shift) - self.point(params - shift)) / (2.0 * step))
        return np.stack(columns, axis=1)

    def active_bounds(self, params, tol: float = 1e-12):
        """(index, inward sign) for every parameter sitting on a bound."""
        params = np.asarray(params, dtype=float).reshape(self.param_dim)
        active = []
        for i, (low, high) in enumerate(self.bounds):
            if low is not None and abs(params[i] - low) <= tol * (1.0 + abs(low)):
                active.append((i, 1.0))
            elif high is not None and abs(params[i] - high) <= tol * (1.0 + abs(high)):
                active.append((i, -1.0))
        return active

    def contains_params(self, params) -> bool:
        params = np.asarray(params, dtype=float).reshape(self.param_dim)
        for value, (low, high) in zip(params, self.bounds):
            if low is not None and value < low - 1e-12:
                return False
            if high is not None and value > high + 1e-12:
                return False
        return True
