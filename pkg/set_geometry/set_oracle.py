"""
InvarLab - Set Oracles
Closed sets exposed through distance, projection, boundary sampling and analytic cone formulas
"""

import logging
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy import optimize

from .polyhedral import cone_projection, dedupe_directions, inequality_cone_generators

logger = logging.getLogger(__name__)

DEFAULT_MEMBER_TOL = 1e-8


class SetGeometryError(Exception):
    """Base class for set and cone computation failures."""


class PointNotInSetError(SetGeometryError):
    def __init__(self, point, distance):
        self.point = np.asarray(point, dtype=float)
        self.distance = float(distance)
        super().__init__(f"point {self.point.tolist()} is not in the set (distance {self.distance:.3e})")


class ProjectionFailure(SetGeometryError):
    """Raised when a numerical projection cannot certify its result."""


def _unit_ball_samples(rng, k, dim):
    directions = rng.standard_normal((k, dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = rng.random(k) ** (1.0 / dim)
    return directions * radii[:, None]


class _Geometry:
    """Per-kind formulas; subclasses override what they know analytically."""

    analytic = True

    def __init__(self, dim):
        self.dim = dim

    def params(self) -> Dict:
        return {}

    def distance(self, x) -> float:
        return float(np.linalg.norm(x - self.project(x)))

    def distance_batch(self, points) -> np.ndarray:
        return np.array([self.distance(point) for point in points])

    def project(self, x) -> np.ndarray:
        raise NotImplementedError

    def boundary_samples(self, k, rng) -> np.ndarray:
        raise NotImplementedError

    def normal_generators(self, x, tol) -> List[np.ndarray]:
        raise NotImplementedError

    def in_tangent_cone(self, x, v, tol) -> bool:
        raise NotImplementedError


class _WholeSpace(_Geometry):
    def distance(self, x):
        return 0.0

    def distance_batch(self, points):
        return np.zeros(points.shape[0])

    def project(self, x):
        return np.array(x, dtype=float)

    def boundary_samples(self, k, rng):
        return np.zeros((0, self.dim))

    def normal_generators(self, x, tol):
        return []

    def in_tangent_cone(self, x, v, tol):
        return True


class _Orthant(_Geometry):
    def distance(self, x):
        return float(np.linalg.norm(np.minimum(x, 0.0)))

    def distance_batch(self, points):
        return np.linalg.norm(np.minimum(points, 0.0), axis=1)

    def project(self, x):
        return np.maximum(x, 0.0)

    def boundary_samples(self, k, rng):
        points = rng.random((k, self.dim))
        for row in points:
            row[rng.integers(self.dim)] = 0.0
            row[rng.random(self.dim) < 0.2] = 0.0
        return points

    def normal_generators(self, x, tol):
        return [-np.eye(self.dim)[i] for i in np.flatnonzero(np.abs(x) <= tol)]

    def in_tangent_cone(self, x, v, tol):
        active = np.abs(x) <= tol
        return bool(np.all(v[active] >= -tol))


class _HalfSpace(_Geometry):
    """{y : <a, y> >= c}."""

    def __init__(self, dim, a, c):
        super().__init__(dim)
        self.a = np.asarray(a, dtype=float).reshape(dim)
        self.c = float(c)
        self.a_norm = float(np.linalg.norm(self.a))
        if self.a_norm == 0.0:
            raise SetGeometryError("half_space needs a nonzero normal vector a")

    def params(self):
        return {'a': self.a.tolist(), 'c': self.c}

    def distance(self, x):
        return max(0.0, self.c - float(self.a @ x)) / self.a_norm

    def distance_batch(self, points):
        return np.maximum(0.0, self.c - points @ self.a) / self.a_norm

    def project(self, x):
        gap = max(0.0, self.c - float(self.a @ x))
        return x + gap * self.a / self.a_norm ** 2

    def boundary_samples(self, k, rng):
        base = self.c * self.a / self.a_norm ** 2
        spread = rng.standard_normal((k, self.dim))
        spread -= np.outer(spread @ self.a, self.a) / self.a_norm ** 2
        return base + spread

    def normal_generators(self, x, tol):
        if abs(float(self.a @ x) - self.c) <= tol * self.a_norm:
            return [-self.a / self.a_norm]
        return []

    def in_tangent_cone(self, x, v, tol):
        if abs(float(self.a @ x) - self.c) <= tol * self.a_norm:
            return float(self.a @ v) >= -tol
        return True


class _Ball(_Geometry):
    def __init__(self, dim, center, radius):
        super().__init__(dim)
        self.center = np.asarray(center, dtype=float).reshape(dim)
        self.radius = float(radius)
        if self.radius <= 0:
            raise SetGeometryError("radius must be positive")

    def params(self):
        return {'center': self.center.tolist(), 'r': self.radius}

    def _offset(self, x):
        offset = x - self.center
        return offset, float(np.linalg.norm(offset))

    def distance(self, x):
        return max(0.0, self._offset(x)[1] - self.radius)

    def distance_batch(self, points):
        return np.maximum(0.0, np.linalg.norm(points - self.center, axis=1) - self.radius)

    def project(self, x):
        offset, norm = self._offset(x)
        if norm <= self.radius:
            return np.array(x, dtype=float)
        return self.center + self.radius * offset / norm

    def boundary_samples(self, k, rng):
        directions = rng.standard_normal((k, self.dim))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        return self.center + self.radius * directions

    def normal_generators(self, x, tol):
        offset, norm = self._offset(x)
        if abs(norm - self.radius) <= tol:
            return [offset / norm]
        return []

    def in_tangent_cone(self, x, v, tol):
        offset, norm = self._offset(x)
        if abs(norm - self.radius) <= tol:
            return float(offset @ v) / norm <= tol
        return True


class _Sphere(_Ball):
    def distance(self, x):
        return abs(self._offset(x)[1] - self.radius)

    def distance_batch(self, points):
        return np.abs(np.linalg.norm(points - self.center, axis=1) - self.radius)

    def project(self, x):
        offset, norm = self._offset(x)
        if norm == 0.0:
            offset, norm = np.eye(self.dim)[0], 1.0
        return self.center + self.radius * offset / norm

    def normal_generators(self, x, tol):
        offset, norm = self._offset(x)
        return [offset / norm, -offset / norm]

    def in_tangent_cone(self, x, v, tol):
        offset, norm = self._offset(x)
        return abs(float(offset @ v)) / norm <= tol * (1.0 + np.linalg.norm(v))


class _PolyhedralCone(_Geometry):
    """{y : <n_i, y> >= 0} for inward facet normals n_i."""

    def __init__(self, dim, facets=None, generators=None):
        super().__init__(dim)
        if (facets is None) == (generators is None):
            raise SetGeometryError("polyhedral_cone needs exactly one of facets or generators")
        if facets is not None:
            self.facets = np.asarray(facets, dtype=float).reshape(-1, dim)
            self.generators = np.array(inequality_cone_generators(-self.facets, dim)).reshape(-1, dim)
        else:
            self.generators = np.asarray(generators, dtype=float).reshape(-1, dim)
            polar = inequality_cone_generators(self.generators, dim)
            self.facets = -np.array(polar).reshape(-1, dim)
        norms = np.linalg.norm(self.facets, axis=1)
        self.facets = self.facets[norms > 0] / norms[norms > 0, None]

    def params(self):
        return {'facets': self.facets.tolist()}

    def project(self, x):
        return cone_projection(self.generators, x)[0]

    def distance(self, x):
        if np.all(self.facets @ x >= 0):
            return 0.0
        return float(np.linalg.norm(x - self.project(x)))

    def boundary_samples(self, k, rng):
        if len(self.facets) == 0:
            return np.zeros((0, self.dim))
        samples = []
        for _ in range(k):
            facet = self.facets[rng.integers(len(self.facets))]
            on_facet = self.generators[np.abs(self.generators @ facet) <= 1e-10]
            if len(on_facet) == 0:
                samples.append(np.zeros(self.dim))
            else:
                samples.append(rng.random(len(on_facet)) @ on_facet)
        return np.array(samples).reshape(-1, self.dim)

    def active_facets(self, x, tol):
        return self.facets[np.abs(self.facets @ x) <= tol]

    def normal_generators(self, x, tol):
        return dedupe_directions([-facet for facet in self.active_facets(x, tol)])

    def in_tangent_cone(self, x, v, tol):
        return bool(np.all(self.active_facets(x, tol) @ v >= -tol))


class _PowerGraph(_Geometry):
    """{(s, |s|^p) : s real} in R^2."""

    GRID = 201

    def __init__(self, dim, p):
        super().__init__(dim)
        if dim != 2:
            raise SetGeometryError("power_graph lives in R^2")
        self.p = float(p)
        if self.p <= 1.0:
            raise SetGeometryError("power_graph needs p > 1")

    def params(self):
        return {'p': self.p}

    def curve(self, s):
        return np.array([s, abs(s) ** self.p])

    def _foot(self, x):
        """Parameter s of the nearest curve point."""
        gap = abs(x[1] - abs(x[0]) ** self.p)
        if gap == 0.0:
            return float(x[0])

        def squared(s):
            return (x[0] - s) ** 2 + (x[1] - abs(s) ** self.p) ** 2

        grid = np.linspace(x[0] - gap, x[0] + gap, self.GRID)
        grid = np.append(grid, 0.0) if abs(x[0]) <= gap else grid
        values = np.array([squared(s) for s in grid])
        best = float(grid[int(np.argmin(values))])
        width = 2.0 * gap / (self.GRID - 1)
        result = optimize.minimize_scalar(
            squared, bounds=(best - width, best + width), method='bounded',
            options={'xatol': 1e-12},
        )
        if result.success and squared(result.x) < squared(best):
            best = float(result.x)
        return best

    def project(self, x):
        return self.curve(self._foot(x))

    def distance(self, x):
        return float(np.linalg.norm(x - self.project(x)))

    def boundary_samples(self, k, rng):
        params = rng.uniform(-1.0, 1.0, k)
        if k:
            params[0] = 0.0
        return np.array([self.curve(s) for s in params]).reshape(-1, 2)

    def _unit_normal(self, x):
        s = float(x[0])
        slope = self.p * np.sign(s) * abs(s) ** (self.p - 1.0)
        normal = np.array([-slope, 1.0])
        return normal / np.linalg.norm(normal)

    def normal_generators(self, x, tol):
        if abs(x[0]) <= tol:
            return [np.array([0.0, -1.0])]
        normal = self._unit_normal(x)
        return [normal, -normal]

    def in_tangent_cone(self, x, v, tol):
        return abs(float(self._unit_normal(x) @ v)) <= tol * (1.0 + np.linalg.norm(v))


class _CustomSet(_Geometry):
    """User set given by callbacks or by constraints g_i(y) >= 0."""

    analytic = False

    def __init__(self, dim, membership=None, distance=None, project=None,
                 constraints: Optional[Sequence[Callable]] = None,
                 sample_center=None, sample_radius=1.0, proj_tol=1e-9):
        super().__init__(dim)
        if constraints is None and project is None and distance is None:
            raise SetGeometryError("custom set needs constraints or distance/project callbacks")
        self.membership_callback = membership
        self.distance_callback = distance
        self.project_callback = project
        self.constraints = list(constraints or [])
        self.sample_center = np.zeros(dim) if sample_center is None else np.asarray(sample_center, dtype=float)
        self.sample_radius = float(sample_radius)
        self.proj_tol = float(proj_tol)

    def params(self):
        return {'constraints': len(self.constraints), 'callbacks': sorted(
            name for name, fn in (('membership', self.membership_callback),
                                  ('distance', self.distance_callback),
                                  ('project', self.project_callback)) if fn is not None)}

    def _feasible(self, y, slack=0.0):
        if self.membership_callback is not None:
            return bool(self.membership_callback(y))
        return all(float(g(y)) >= -slack for g in self.constraints)

    def project(self, x):
        x = np.asarray(x, dtype=float)
        if self.project_callback is not None:
            return np.asarray(self.project_callback(x), dtype=float)
        if self._feasible(x, self.proj_tol):
            return x.copy()
        if not self.constraints:
            raise ProjectionFailure("no projection callback and no constraints to descend on")

        cons = [{'type': 'ineq', 'fun': (lambda y, g=g: float(g(y)))} for g in self.constraints]
        result = optimize.minimize(
            lambda y: float(np.sum((y - x) ** 2)), x, jac=lambda y: 2.0 * (y - x),
            constraints=cons, method='SLSQP', options={'ftol': 1e-14, 'maxiter': 200},
        )
        violation = max((-float(g(result.x)) for g in self.constraints), default=0.0)
        if not result.success or violation > 1e3 * self.proj_tol:
            raise ProjectionFailure(
                f"local projection from {x.tolist()} failed: {result.message} (violation {violation:.2e})"
            )
        return np.asarray(result.x, dtype=float)

    def distance(self, x):
        if self.distance_callback is not None:
            return float(self.distance_callback(np.asarray(x, dtype=float)))
        return float(np.linalg.norm(np.asarray(x, dtype=float) - self.project(x)))

    def boundary_samples(self, k, rng):
        samples = []
        attempts = 0
        while len(samples) < k and attempts < 20 * max(k, 1):
            attempts += 1
            z = self.sample_center + self.sample_radius * _unit_ball_samples(rng, 1, self.dim)[0]
            if self._feasible(z):
                continue
            try:
                samples.append(self.project(z))
            except ProjectionFailure as exc:
                logger.warning("Boundary sample dropped: %s", exc)
        return np.array(samples).reshape(-1, self.dim)

    def normal_generators(self, x, tol):
        return None

    def in_tangent_cone(self, x, v, tol):
        return None


class SetOracle:
    """A closed set D in R^n with distance, projection and cone oracles."""

    KINDS = ('orthant', 'half_space', 'ball', 'sphere', 'polyhedral_cone',
             'power_graph', 'custom', 'whole_space')

    def __init__(self, kind: str, geometry: _Geometry, member_tol: float = DEFAULT_MEMBER_TOL):
        self.kind = kind
        self.geometry = geometry
        self.dim = geometry.dim
        self.member_tol = float(member_tol)

    @classmethod
    def orthant(cls, dim: int) -> 'SetOracle':
        return cls('orthant', _Orthant(dim))

    @classmethod
    def half_space(cls, a, c: float = 0.0) -> 'SetOracle':
        a = np.asarray(a, dtype=float).reshape(-1)
        return cls('half_space', _HalfSpace(a.shape[0], a, c))

    @classmethod
    def ball(cls, center, radius: float) -> 'SetOracle':
        center = np.asarray(center, dtype=float).reshape(-1)
        return cls('ball', _Ball(center.shape[0], center, radius))

    @classmethod
    def sphere(cls, center, radius: float) -> 'SetOracle':
        center = np.asarray(center, dtype=float).reshape(-1)
        return cls('sphere', _Sphere(center.shape[0], center, radius))

    @classmethod
    def polyhedral_cone(cls, dim: int, facets=None, generators=None) -> 'SetOracle':
        return cls('polyhedral_cone', _PolyhedralCone(dim, facets=facets, generators=generators))

    @classmethod
    def power_graph(cls, p: float = 1.5) -> 'SetOracle':
        return cls('power_graph', _PowerGraph(2, p))

    @classmethod
    def whole_space(cls, dim: int) -> 'SetOracle':
        return cls('whole_space', _WholeSpace(dim))

    @classmethod
    def custom(cls, dim: int, **callbacks) -> 'SetOracle':
        return cls('custom', _CustomSet(dim, **callbacks))

    @property
    def has_analytic_cones(self) -> bool:
        return self.geometry.analytic

    def describe(self) -> Dict:
        return {'kind': self.kind, 'dim': self.dim, **self.geometry.params()}

    def _point(self, x):
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != self.dim:
            raise SetGeometryError(f"point has length {x.shape[0]}, expected {self.dim}")
        return x

    def distance(self, x) -> float:
        return self.geometry.distance(self._point(x))

    def distance_batch(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float).reshape(-1, self.dim)
        return self.geometry.distance_batch(points)

    def project(self, x) -> np.ndarray:
        return self.geometry.project(self._point(x))

    def membership(self, x) -> bool:
        x = self._point(x)
        return self.distance(x) <= self.member_tol * (1.0 + np.linalg.norm(x))

    def require_member(self, x) -> np.ndarray:
        """Return x as an array, raising PointNotInSetError when it is outside."""
        x = self._point(x)
        distance = self.distance(x)
        if distance > self.member_tol * (1.0 + np.linalg.norm(x)):
            raise PointNotInSetError(x, distance)
        return x

    def boundary_samples(self, k: int, rng: np.random.Generator) -> np.ndarray:
        return self.geometry.boundary_samples(int(k), rng)

    def sample_points(self, k: int, radius: float, rng: np.random.Generator, center=None) -> np.ndarray:
        """Projections of ambient probes within radius of center that stay within radius."""
        center = np.zeros(self.dim) if center is None else self._point(center)
        probes = center + radius * _unit_ball_samples(rng, int(k), self.dim)
        points = []
        for probe in probes:
            try:
                point = self.project(probe)
            except ProjectionFailure as exc:
                logger.debug("Probe projection failed: %s", exc)
                continue
            if np.linalg.norm(point - center) <= radius:
                points.append(point)
        return np.array(points).reshape(-1, self.dim)

    def analytic_normal_cone(self, x) -> Optional[List[np.ndarray]]:
        """Unit generators of the proximal normal cone, or None for custom sets."""
        x = self._point(x)
        tol = self.member_tol * (1.0 + np.linalg.norm(x))
        generators = self.geometry.normal_generators(x, tol)
        return None if generators is None else [np.asarray(g, dtype=float) for g in generators]

    def analytic_tangent(self, x, v) -> Optional[bool]:
        """Tangent-cone membership predicate, or None when not known in closed form."""
        x = self._point(x)
        tol = self.member_tol * (1.0 + np.linalg.norm(x))
        return self.geometry.in_tangent_cone(x, np.asarray(v, dtype=float).reshape(-1), tol)
