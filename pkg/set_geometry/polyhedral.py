"""
InvarLab - Polyhedral Cone Helpers
Generator enumeration for {v : A v <= 0}, polar cones and projection by non-negative least squares
"""

import itertools
import logging
from typing import List

import numpy as np
from scipy import linalg, optimize

logger = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-10


def _unit(vector):
    norm = np.linalg.norm(vector)
    return vector / norm if norm > 0 else vector


def dedupe_directions(vectors, tol: float = 1e-9) -> List[np.ndarray]:
    """Drop zero vectors and repeated unit directions, keeping first occurrence."""
    kept: List[np.ndarray] = []
    for vector in vectors:
        vector = _unit(np.asarray(vector, dtype=float))
        if not np.any(vector):
            continue
        if any(np.linalg.norm(vector - other) <= tol for other in kept):
            continue
        kept.append(vector)
    return kept


def inequality_cone_generators(rows, dim: int, tol: float = FEASIBILITY_TOL) -> List[np.ndarray]:
    """Unit generators of the cone {v in R^dim : rows @ v <= 0}.

    The lineality space contributes +/- pairs; extreme rays of the pointed
    part are found by enumerating active sets of rank k-1 in its complement.
    """
    rows = np.asarray(rows, dtype=float).reshape(-1, dim)
    if rows.shape[0] == 0:
        basis = np.eye(dim)
        return dedupe_directions([sign * basis[:, i] for i in range(dim) for sign in (1.0, -1.0)])

    lineality = linalg.null_space(rows)
    generators = [sign * lineality[:, i] for i in range(lineality.shape[1]) for sign in (1.0, -1.0)]

    # orthonormal basis of the complement of the lineality space
    complement = linalg.orth(rows.T)
    k = complement.shape[1]
    reduced = rows @ complement
    scale = 1.0 + float(np.max(np.abs(reduced))) if reduced.size else 1.0

    if k == 0:
        return dedupe_directions(generators)

    candidates = []
    for active in itertools.combinations(range(reduced.shape[0]), k - 1):
        block = reduced[list(active), :] if active else np.zeros((0, k))
        kernel = linalg.null_space(block) if block.shape[0] else np.eye(k)
        if kernel.shape[1] != 1:
            continue
        direction = kernel[:, 0]
        for sign in (1.0, -1.0):
            ray = sign * direction
            if np.all(reduced @ ray <= tol * scale):
                candidates.append(complement @ ray)

    return dedupe_directions(generators + candidates)


def polar_generators(generators, dim: int) -> List[np.ndarray]:
    """Generators of the polar cone {w : <w, g> <= 0 for every generator g}."""
    generators = np.asarray(generators, dtype=float).reshape(-1, dim)
    return inequality_cone_generators(generators, dim)


def cone_projection(generators, point):
    """Euclidean projection onto cone(generators) with its coefficients."""
    point = np.asarray(point, dtype=float)
    generators = np.asarray(generators, dtype=float)
    if generators.size == 0:
        return np.zeros_like(point), np.zeros(0)
    matrix = generators.reshape(-1, point.shape[0]).T
    coefficients, _ = optimize.nnls(matrix, point)
    return matrix @ coefficients, coefficients


def in_cone(generators, vector, tol: float = 1e-8) -> bool:
    """Membership of vector in cone(generators) up to a relative residual."""
    vector = np.asarray(vector, dtype=float)
    projected, _ = cone_projection(generators, vector)
    return bool(np.linalg.norm(vector - projected) <= tol * (1.0 + np.linalg.norm(vector)))
