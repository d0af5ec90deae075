"""
InvarLab - Cone Analyzer
Proximal normals, Bouligand tangency, polyhedral and manifold cones, contingent curvature
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

import numpy as np
from scipy import linalg

from operator_toolkit import SymOperator

from .manifold import ParametrizedManifold, RankDeficientJacobianError
from .polyhedral import dedupe_directions, in_cone, inequality_cone_generators
from .set_oracle import ProjectionFailure, SetGeometryError, SetOracle

logger = logging.getLogger(__name__)


class ConeAnalyzer:
    """Variational-geometry probes on SetOracle instances."""

    DEFAULT_TOLERANCES = {
        'prox_tol': 1e-7,
        'tangent_tol': 1e-4,
        'tangent_t0': 1e-2,
        'tangent_imax': 20,
        'fd_step': 1e-5,
    }

    def __init__(self, tolerances: Optional[Dict] = None, seed: int = 20240101):
        self.load_tolerances(tolerances)
        self.seed = int(seed)

    def load_tolerances(self, overrides: Optional[Dict] = None):
        """Defaults with any matching overrides applied."""
        self.tolerances = dict(self.DEFAULT_TOLERANCES)
        for key, value in (overrides or {}).items():
            if key in self.tolerances:
                self.tolerances[key] = value

    def _rng(self, rng):
        return rng if rng is not None else np.random.default_rng(self.seed)

    def prox_normal_test(self, oracle: SetOracle, x, u, t: float) -> bool:
        """|d(x + t u) - t|u|| <= prox_tol (1 + t|u|)."""
        if t <= 0:
            raise SetGeometryError("probe length t must be positive")
        x = oracle.require_member(x)
        u = np.asarray(u, dtype=float).reshape(-1)
        reach = t * float(np.linalg.norm(u))
        gap = abs(oracle.distance(x + t * u) - reach)
        return gap <= self.tolerances['prox_tol'] * (1.0 + reach)

    def prox_inequality_test(self, oracle: SetOracle, x, u, t: float, radius: float,
                             n_samples: int, rng: Optional[np.random.Generator] = None) -> bool:
        """<u, y - x> <= |y - x|^2 / (2t) + prox_tol over sampled y in D near x."""
        x = oracle.require_member(x)
        u = np.asarray(u, dtype=float).reshape(-1)
        samples = oracle.sample_points(n_samples, radius, self._rng(rng), center=x)
        if samples.shape[0] == 0:
            raise SetGeometryError(f"sampler produced no set points within {radius} of {x.tolist()}")

        offsets = samples - x
        lhs = offsets @ u
        rhs = np.sum(offsets ** 2, axis=1) / (2.0 * t) + self.tolerances['prox_tol']
        worst = int(np.argmax(lhs - rhs))
        if lhs[worst] > rhs[worst]:
            logger.debug("Proximal inequality broken at y=%s (excess %.3e)",
                         samples[worst].tolist(), lhs[worst] - rhs[worst])
            return False
        return True

    def normal_cone_samples(self, oracle: SetOracle, x, k: int = 8,
                            rng: Optional[np.random.Generator] = None,
                            analytic: bool = True) -> List[np.ndarray]:
        """Up to k unit proximal normals at x; empty at interior points."""
        x = oracle.require_member(x)
        if analytic and oracle.has_analytic_cones:
            generators = oracle.analytic_normal_cone(x)
            return generators[:k]
        return self._sampled_normals(oracle, x, k, self._rng(rng))

    def _sampled_normals(self, oracle, x, k, rng, n_probes=None, refinements=6):
        probe = 1e-3 * (1.0 + np.linalg.norm(x))
        n_probes = n_probes or max(8 * k, 64)
        tiny = 1e-12 * (1.0 + np.linalg.norm(x))
        found: List[np.ndarray] = []

        directions = rng.standard_normal((n_probes, oracle.dim))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        for direction in directions:
            u = direction
            try:
                for _ in range(refinements):
                    z = x + probe * u
                    gap = z - oracle.project(z)
                    length = np.linalg.norm(gap)
                    if length <= tiny:
                        u = None
                        break
                    refined = gap / length
                    converged = np.linalg.norm(refined - u) <= 1e-12
                    u = refined
                    if converged:
                        break
            except ProjectionFailure as exc:
                logger.warning("Normal probe at %s skipped: %s", x.tolist(), exc)
                continue
            if u is None or not self.prox_normal_test(oracle, x, u, probe):
                continue
            found = dedupe_directions(found + [u], tol=1e-6)
            if len(found) >= k:
                break
        return found[:k]

    def tangent_ratio(self, oracle: SetOracle, x, v) -> float:
        """Running minimum of d(x + t v)/t over t = t0 2^-i."""
        x = oracle.require_member(x)
        v = np.asarray(v, dtype=float).reshape(-1)
        t0 = float(self.tolerances['tangent_t0'])
        best = np.inf
        for i in range(int(self.tolerances['tangent_imax']) + 1):
            t = t0 * 2.0 ** (-i)
            best = min(best, oracle.distance(x + t * v) / t)
        return float(best)

    def tangent_test(self, oracle: SetOracle, x, v) -> bool:
        """True when tangent_ratio < tangent_tol * max(1, |v|).

        The ratio is positively homogeneous in v, so the threshold is relative for long
        vectors and the verdict for v and c v (c >= 1) agrees.
        """
        scale = max(1.0, float(np.linalg.norm(v)))
        return self.tangent_ratio(oracle, x, v) < self.tolerances['tangent_tol'] * scale

    def cone_cones(self, x, facets=None, generators=None) -> Dict[str, List[np.ndarray]]:
        """Tangent and normal generators of a polyhedral cone at x.

        T = D + lin{x} and N = polar(D) intersected with x-perp.
        """
        x = np.asarray(x, dtype=float).reshape(-1)
        cone = SetOracle.polyhedral_cone(x.shape[0], facets=facets, generators=generators)
        x = cone.require_member(x)
        tol = cone.member_tol * (1.0 + np.linalg.norm(x))
        active = cone.geometry.active_facets(x, tol)
        normal = dedupe_directions([-facet for facet in active])
        tangent = inequality_cone_generators(-active, x.shape[0])
        return {'tangent': tangent, 'normal': normal}

    def manifold_cones(self, manifold: ParametrizedManifold, params) -> Dict:
        """Tangent space, boundary half-space and normal generators at phi(params)."""
        params = np.asarray(params, dtype=float).reshape(manifold.param_dim)
        x = manifold.point(params)
        jac = manifold.jacobian(params)
        singular = np.linalg.svd(jac, compute_uv=False)
        rank = int(np.sum(singular > 1e-10 * max(1.0, singular[0] if singular.size else 1.0)))
        if rank < manifold.param_dim:
            raise RankDeficientJacobianError(params, rank, manifold.param_dim)

        tangent_basis = linalg.orth(jac)
        normal_basis = linalg.null_space(jac.T)
        normals = [sign * normal_basis[:, i] for i in range(normal_basis.shape[1]) for sign in (1.0, -1.0)]

        active = manifold.active_bounds(params)
        if len(active) > 1:
            raise SetGeometryError(
                f"parameters {params.tolist()} sit on {len(active)} bounds; corners are not supported"
            )
        outward = None
        boundary_basis = tangent_basis
        if active:
            index, inward_sign = active[0]
            others = [j for j in range(manifold.param_dim) if j != index]
            boundary_basis = linalg.orth(jac[:, others]) if others else np.zeros((x.shape[0], 0))
            inward = inward_sign * jac[:, index]
            remainder = inward - boundary_basis @ (boundary_basis.T @ inward)
            outward = -remainder / np.linalg.norm(remainder)
            normals.append(outward)

        return {
            'point': x,
            'tangent_basis': tangent_basis,
            'boundary_tangent_basis': boundary_basis if active else None,
            'outward_normal': outward,
            'on_boundary': bool(active),
            'normal_generators': dedupe_directions(normals),
        }

    def in_manifold_tangent(self, cones: Dict, v, tol: float = 1e-8, boundary: bool = False) -> bool:
        """v in T_xM, or in T_x(dM) when boundary is set."""
        v = np.asarray(v, dtype=float).reshape(-1)
        basis = cones['boundary_tangent_basis'] if boundary and cones['on_boundary'] else cones['tangent_basis']
        remainder = v - basis @ (basis.T @ v)
        return bool(np.linalg.norm(remainder) <= tol * (1.0 + np.linalg.norm(v)))

    def in_manifold_half_tangent(self, cones: Dict, v, tol: float = 1e-8) -> bool:
        """v in (T_xM)_+ = {w in T_xM : <n_x, w> <= 0}."""
        if not self.in_manifold_tangent(cones, v, tol):
            return False
        if cones['outward_normal'] is None:
            return True
        return float(cones['outward_normal'] @ np.asarray(v, dtype=float)) <= tol

    def normals_in_cone(self, normals, generators, tol: float = 1e-8) -> bool:
        """Every sampled normal lies in cone(generators)."""
        return all(in_cone(generators, u, tol) for u in normals)

    def curvature(self, tangent_field: Callable, x, u, v) -> float:
        """-<u, J_tau(x) v> with a central difference along v."""
        x = np.asarray(x, dtype=float).reshape(-1)
        u = np.asarray(u, dtype=float).reshape(-1)
        v = np.asarray(v, dtype=float).reshape(-1)
        step = self.tolerances['fd_step'] * (1.0 + np.linalg.norm(x))
        forward = np.asarray(tangent_field(x + step * v), dtype=float)
        backward = np.asarray(tangent_field(x - step * v), dtype=float)
        return -float(u @ ((forward - backward) / (2.0 * step)))


@dataclass(frozen=True, eq=False)
class NormalPair:
    """Second-order normal (u, v) with v a symmetric operator."""

    u: np.ndarray
    v: SymOperator

    @classmethod
    def build(cls, u, v=None) -> 'NormalPair':
        u = np.asarray(u, dtype=float).reshape(-1)
        matrix = np.zeros((u.shape[0], u.shape[0])) if v is None else v
        operator = matrix if isinstance(matrix, SymOperator) else SymOperator.from_matrix(matrix)
        return cls(u, operator)
