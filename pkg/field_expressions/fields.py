"""
InvarLab - Field Wrappers
Vector and matrix fields compiled from expressions or wrapped around Python callables
"""

from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .differences import DEFAULT_FD_STEP, jacobian
from .expression import Expression, ExpressionDomainError, ExpressionError


class DifferentiableField:
    """Central-difference Jacobian shared by every field kind."""

    shape: Tuple[int, ...]

    def jacobian(self, x, base_step: float = DEFAULT_FD_STEP) -> np.ndarray:
        """Array of shape self.shape + (dim,), entry [..., l] = dF/dy_l at x."""
        return jacobian(self, x, base_step)


class VectorField(DifferentiableField):
    """x -> (e_1(x), ..., e_k(x)) built from one expression per component."""

    def __init__(self, components: Sequence[Expression]):
        if not components:
            raise ExpressionError("a vector field needs at least one component")
        dims = {component.dim for component in components}
        if len(dims) != 1:
            raise ExpressionError(f"components disagree on dimension: {sorted(dims)}")
        self.components: List[Expression] = list(components)
        self.dim = dims.pop()
        self.shape: Tuple[int, ...] = (len(self.components),)

    def __call__(self, x) -> np.ndarray:
        return np.array([component.eval(x) for component in self.components])

    def batch(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return np.stack([component.evaluate_batch(points) for component in self.components], axis=1)

    def to_text(self) -> List[str]:
        return [component.to_text() for component in self.components]


class MatrixField(DifferentiableField):
    """x -> M(x) built from a rectangular grid of expressions."""

    def __init__(self, rows: Sequence[Sequence[Expression]]):
        if not rows or not rows[0]:
            raise ExpressionError("a matrix field needs at least one entry")
        width = len(rows[0])
        if any(len(row) != width for row in rows):
            raise ExpressionError("matrix field rows have different lengths")
        dims = {entry.dim for row in rows for entry in row}
        if len(dims) != 1:
            raise ExpressionError(f"entries disagree on dimension: {sorted(dims)}")
        self.rows = [list(row) for row in rows]
        self.dim = dims.pop()
        self.shape: Tuple[int, ...] = (len(self.rows), width)

    def __call__(self, x) -> np.ndarray:
        return np.array([[entry.eval(x) for entry in row] for row in self.rows])

    def batch(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.empty((points.shape[0],) + self.shape)
        for i, row in enumerate(self.rows):
            for j, entry in enumerate(row):
                out[:, i, j] = entry.evaluate_batch(points)
        return out

    def to_text(self) -> List[List[str]]:
        return [[entry.to_text() for entry in row] for row in self.rows]


class CallableField(DifferentiableField):
    """Adapter giving a plain function the same interface as compiled fields."""

    def __init__(self, function: Callable, dim: int, shape: Tuple[int, ...],
                 batch_function: Optional[Callable] = None, name: str = 'callable'):
        self.function = function
        self.batch_function = batch_function
        self.dim = int(dim)
        self.shape = tuple(shape)
        self.name = name

    def __call__(self, x) -> np.ndarray:
        value = np.asarray(self.function(np.asarray(x, dtype=float)), dtype=float)
        return value.reshape(self.shape)

    def batch(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.batch_function is not None:
            with np.errstate(all='ignore'):
                values = np.asarray(self.batch_function(points), dtype=float)
            values = values.reshape((points.shape[0],) + self.shape)
            return np.where(np.isfinite(values), values, np.nan)

        out = np.full((points.shape[0],) + self.shape, np.nan)
        for k, point in enumerate(points):
            try:
                out[k] = self(point)
            except (ArithmeticError, ValueError, ExpressionDomainError):
                continue
        return np.where(np.isfinite(out), out, np.nan)

    def to_text(self) -> str:
        return f"<{self.name}>"


def constant_vector(values, dim: int) -> CallableField:
    values = np.asarray(values, dtype=float).reshape(-1)
    return CallableField(
        lambda x: values, dim, values.shape,
        batch_function=lambda points: np.tile(values, (points.shape[0], 1)),
        name='constant',
    )


def constant_matrix(matrix, dim: int) -> CallableField:
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    return CallableField(
        lambda x: matrix, dim, matrix.shape,
        batch_function=lambda points: np.broadcast_to(matrix, (points.shape[0],) + matrix.shape),
        name='constant',
    )
