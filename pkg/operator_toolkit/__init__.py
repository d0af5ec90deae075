"""
InvarLab - Operator Toolkit Module
Finite-dimensional self-adjoint operators: spectra, pseudoinverses, square roots
"""

from .sym_operator import (
    OperatorToolkit,
    SymOperator,
    SpectralDecomp,
    OperatorError,
    NonSymmetricOperatorError,
)

__all__ = [
    'OperatorToolkit',
    'SymOperator',
    'SpectralDecomp',
    'OperatorError',
    'NonSymmetricOperatorError',
]
