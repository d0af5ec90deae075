"""
InvarLab - Invariance Checker Module
Kernel and corrected-drift conditions for diffusions on closed sets
"""

from .model_spec import (
    ModelSpec,
    ModelSpecError,
    BUILTIN_MODELS,
    build_builtin,
    cir_model,
    ou_model,
    linear_sigma_model,
    orthant_diag_model,
    rank_one_plane_model,
)
from .finite_difference import FiniteDifferenceError
from .reports import PointVerdict, CheckReport, aggregate_verdict, to_jsonable, PASS, FAIL, INCONCLUSIVE
from .invariance_checker import InvarianceChecker

__all__ = [
    'InvarianceChecker',
    'ModelSpec',
    'BUILTIN_MODELS',
    'build_builtin',
    'cir_model',
    'ou_model',
    'linear_sigma_model',
    'orthant_diag_model',
    'rank_one_plane_model',
    'PointVerdict',
    'CheckReport',
    'aggregate_verdict',
    'to_jsonable',
    'PASS',
    'FAIL',
    'INCONCLUSIVE',
    'ModelSpecError',
    'FiniteDifferenceError',
]
