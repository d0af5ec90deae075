"""
InvarLab - Path Simulator Module
Monte Carlo ensembles, invariance statistics and ODE viability integration
"""

from .path_simulator import PathSimulator, SimConfig, PathEnsemble, SimulationError
from .random_streams import path_generator, path_normals, wiener_increments

__all__ = [
    'PathSimulator',
    'SimConfig',
    'PathEnsemble',
    'SimulationError',
    'path_generator',
    'path_normals',
    'wiener_increments',
]
