"""
InvarLab - Set Geometry Module
Closed-set oracles, proximal normal and tangent cones, manifold cones and curvature
"""

from .set_oracle import (
    SetOracle,
    SetGeometryError,
    PointNotInSetError,
    ProjectionFailure,
)
from .manifold import ParametrizedManifold, RankDeficientJacobianError
from .cone_analyzer import ConeAnalyzer, NormalPair
from .polyhedral import inequality_cone_generators, polar_generators, cone_projection, in_cone

__all__ = [
    'SetOracle',
    'ConeAnalyzer',
    'NormalPair',
    'ParametrizedManifold',
    'inequality_cone_generators',
    'polar_generators',
    'cone_projection',
    'in_cone',
    'SetGeometryError',
    'PointNotInSetError',
    'ProjectionFailure',
    'RankDeficientJacobianError',
]
