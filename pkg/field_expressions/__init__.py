"""
InvarLab - Field Expressions Module
Small arithmetic language for drift, diffusion and test-function fields
"""

from .expression import (
    Expression,
    ExpressionError,
    ExpressionSyntaxError,
    UnknownIdentifierError,
    VariableIndexError,
    ExpressionDomainError,
)
from .expression_parser import ExpressionParser, parse
from .differences import DEFAULT_FD_STEP, FiniteDifferenceError, jacobian, partials, scaled_step
from .fields import (
    DifferentiableField,
    VectorField,
    MatrixField,
    CallableField,
    constant_vector,
    constant_matrix,
)

__all__ = [
    'ExpressionParser',
    'Expression',
    'parse',
    'VectorField',
    'MatrixField',
    'CallableField',
    'DifferentiableField',
    'constant_vector',
    'constant_matrix',
    'ExpressionError',
    'ExpressionSyntaxError',
    'UnknownIdentifierError',
    'VariableIndexError',
    'ExpressionDomainError',
    'FiniteDifferenceError',
    'DEFAULT_FD_STEP',
    'partials',
    'jacobian',
    'scaled_step',
]
