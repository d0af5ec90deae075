"""
InvarLab - Expression Tree
Immutable AST nodes for user-defined scalar fields with scalar and batched evaluation
"""

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np


class ExpressionError(Exception):
    """Base class for expression parsing and evaluation failures."""


class ExpressionSyntaxError(ExpressionError):
    def __init__(self, message, offset):
        self.offset = int(offset)
        super().__init__(f"{message} at byte offset {self.offset}")


class UnknownIdentifierError(ExpressionSyntaxError):
    def __init__(self, name, offset):
        self.name = name
        super().__init__(f"unknown identifier '{name}'", offset)


class VariableIndexError(ExpressionSyntaxError):
    def __init__(self, name, dim, offset):
        self.name = name
        self.dim = dim
        super().__init__(f"variable '{name}' exceeds declared dimension {dim}", offset)


class ExpressionDomainError(ExpressionError):
    """Raised when a sub-expression leaves the real domain of its operator."""

    def __init__(self, message, location, fragment):
        self.location = int(location)
        self.fragment = fragment
        super().__init__(f"{message} in '{fragment}' at byte offset {self.location}")


def _finite_or_nan(values):
    values = np.asarray(values, dtype=float)
    return np.where(np.isfinite(values), values, np.nan)


@dataclass(frozen=True)
class Number:
    value: float
    offset: int = 0

    def evaluate(self, point):
        return self.value

    def evaluate_batch(self, points):
        return np.full(points.shape[0], self.value)

    def to_text(self):
        if math.copysign(1.0, self.value) < 0:
            return f"(-{repr(-self.value)})"
        return repr(self.value)

    def max_variable(self):
        return 0


@dataclass(frozen=True)
class Variable:
    index: int
    offset: int = 0

    def evaluate(self, point):
        return float(point[self.index - 1])

    def evaluate_batch(self, points):
        return np.asarray(points[:, self.index - 1], dtype=float)

    def to_text(self):
        return f"x{self.index}"

    def max_variable(self):
        return self.index


@dataclass(frozen=True)
class Negate:
    operand: object
    offset: int = 0

    def evaluate(self, point):
        return -self.operand.evaluate(point)

    def evaluate_batch(self, points):
        return -self.operand.evaluate_batch(points)

    def to_text(self):
        return f"(-{self.operand.to_text()})"

    def max_variable(self):
        return self.operand.max_variable()


@dataclass(frozen=True)
class BinaryOp:
    op: str
    left: object
    right: object
    offset: int = 0

    def to_text(self):
        return f"({self.left.to_text()} {self.op} {self.right.to_text()})"

    def max_variable(self):
        return max(self.left.max_variable(), self.right.max_variable())

    def _fail(self, message):
        raise ExpressionDomainError(message, self.offset, self.to_text())

    def evaluate(self, point):
        left = self.left.evaluate(point)
        right = self.right.evaluate(point)
        if self.op == '+':
            return left + right
        if self.op == '-':
            return left - right
        if self.op == '*':
            return left * right
        if self.op == '/':
            if right == 0.0:
                self._fail("division by zero")
            return left / right
        return _scalar_power(left, right, self._fail)

    def evaluate_batch(self, points):
        left = self.left.evaluate_batch(points)
        right = self.right.evaluate_batch(points)
        with np.errstate(all='ignore'):
            if self.op == '+':
                result = left + right
            elif self.op == '-':
                result = left - right
            elif self.op == '*':
                result = left * right
            elif self.op == '/':
                result = np.where(right == 0.0, np.nan, left / np.where(right == 0.0, 1.0, right))
            else:
                bad = (left < 0) & (right != np.round(right))
                bad |= (left == 0) & (right < 0)
                result = np.where(bad, np.nan, np.power(np.where(bad, 1.0, left), right))
        return _finite_or_nan(result)


def _scalar_power(base, exponent, fail):
    if base < 0 and not float(exponent).is_integer():
        fail("negative base with non-integer exponent")
    if base == 0 and exponent < 0:
        fail("division by zero")
    try:
        return math.pow(base, exponent)
    except OverflowError:
        fail("overflow")


def _scalar_sqrt(value, fail):
    if value < 0:
        fail("square root of a negative number")
    return math.sqrt(value)


def _scalar_log(value, fail):
    if value <= 0:
        fail("logarithm of a non-positive number")
    return math.log(value)


def _scalar_exp(value, fail):
    try:
        return math.exp(value)
    except OverflowError:
        fail("overflow")


def _scalar_pow(base, exponent, fail):
    return _scalar_power(base, exponent, fail)


def _batch_sqrt(value):
    return np.where(value < 0, np.nan, np.sqrt(np.abs(value)))


def _batch_log(value):
    return np.where(value <= 0, np.nan, np.log(np.where(value <= 0, 1.0, value)))


def _batch_pow(base, exponent):
    bad = ((base < 0) & (exponent != np.round(exponent))) | ((base == 0) & (exponent < 0))
    return np.where(bad, np.nan, np.power(np.where(bad, 1.0, base), exponent))


# name -> (min arity, max arity or None, scalar impl, batch impl)
FUNCTION_TABLE = {
    'sqrt': (1, 1, _scalar_sqrt, _batch_sqrt),
    'exp': (1, 1, _scalar_exp, np.exp),
    'log': (1, 1, _scalar_log, _batch_log),
    'abs': (1, 1, lambda value, fail: abs(value), np.abs),
    'sin': (1, 1, lambda value, fail: math.sin(value), np.sin),
    'cos': (1, 1, lambda value, fail: math.cos(value), np.cos),
    'min': (2, None, lambda *args: min(args[:-1]), lambda *args: np.minimum.reduce(args)),
    'max': (2, None, lambda *args: max(args[:-1]), lambda *args: np.maximum.reduce(args)),
    'pow': (2, 2, _scalar_pow, _batch_pow),
}


@dataclass(frozen=True)
class FunctionCall:
    name: str
    args: Tuple[object, ...]
    offset: int = 0

    def to_text(self):
        return f"{self.name}({', '.join(arg.to_text() for arg in self.args)})"

    def max_variable(self):
        return max(arg.max_variable() for arg in self.args)

    def _fail(self, message):
        raise ExpressionDomainError(message, self.offset, self.to_text())

    def evaluate(self, point):
        values = [arg.evaluate(point) for arg in self.args]
        scalar = FUNCTION_TABLE[self.name][2]
        return scalar(*values, self._fail)

    def evaluate_batch(self, points):
        values = [arg.evaluate_batch(points) for arg in self.args]
        batch = FUNCTION_TABLE[self.name][3]
        with np.errstate(all='ignore'):
            return _finite_or_nan(batch(*values))


class Expression:
    """A parsed scalar field over x1..x_dim."""

    def __init__(self, root, dim, text=None):
        self.root = root
        self.dim = int(dim)
        self.text = text if text is not None else root.to_text()

    def __repr__(self):
        return f"Expression({self.to_text()!r}, dim={self.dim})"

    def eval(self, point) -> float:
        """Evaluate at one point; raises ExpressionDomainError off the real domain."""
        point = np.asarray(point, dtype=float).reshape(-1)
        if point.shape[0] != self.dim:
            raise ExpressionError(f"point has length {point.shape[0]}, expected {self.dim}")
        value = float(self.root.evaluate(point))
        if not math.isfinite(value):
            raise ExpressionDomainError("non-finite result", self.root.offset, self.to_text())
        return value

    def evaluate_batch(self, points) -> np.ndarray:
        """Evaluate on an (m, dim) array; domain errors become NaN."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[1] != self.dim:
            raise ExpressionError(f"points have width {points.shape[1]}, expected {self.dim}")
        values = self.root.evaluate_batch(points)
        return np.broadcast_to(values, (points.shape[0],)).astype(float)

    def to_text(self) -> str:
        return self.root.to_text()

    def is_constant(self) -> bool:
        return self.root.max_variable() == 0
