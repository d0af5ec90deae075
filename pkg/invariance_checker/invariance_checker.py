"""
InvarLab - Invariance Checker
Dispersion-kernel and corrected-drift conditions, generator probes and set-level verdicts
"""

import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from field_expressions import ExpressionError
from operator_toolkit import OperatorError, OperatorToolkit, SymOperator
from set_geometry import (
    ConeAnalyzer,
    NormalPair,
    ParametrizedManifold,
    SetGeometryError,
    SetOracle,
)

from .finite_difference import FiniteDifferenceError, gradient, hessian, jacobian, partials
from .model_spec import ModelSpec, ModelSpecError
from .reports import FAIL, INCONCLUSIVE, PASS, CheckReport, PointVerdict, aggregate_verdict

logger = logging.getLogger(__name__)

POINT_ERRORS = (SetGeometryError, FiniteDifferenceError, ModelSpecError, OperatorError)


def _scalar_function(phi) -> Callable:
    """Accept an Expression (anything with .eval) or a plain callable."""
    if hasattr(phi, 'eval'):
        return phi.eval
    return phi


class InvarianceChecker:
    """Evaluates stochastic-invariance conditions for a model on a closed set."""

    DEFAULT_TOLERANCES = {
        'rank_tol': 1e-10,
        'tol_eq': 1e-8,
        'tol_ineq': 1e-7,
        'fd_step': 1e-5,
        'fd_step_hessian': 1e-4,
    }

    def __init__(self, tolerances: Optional[Dict] = None, seed: int = 20240101,
                 threads: int = 1, normals_per_point: int = 8):
        self.load_tolerances(tolerances)
        self.seed = int(seed)
        self.threads = max(1, int(threads))
        self.normals_per_point = int(normals_per_point)
        self.toolkit = OperatorToolkit(rank_tol=self.tolerances['rank_tol'])
        self.cone_analyzer = ConeAnalyzer(tolerances, seed=self.seed)

    def load_tolerances(self, overrides: Optional[Dict] = None):
        """Defaults with any matching overrides applied."""
        self.tolerances = dict(self.DEFAULT_TOLERANCES)
        for key, value in (overrides or {}).items():
            if key in self.tolerances:
                self.tolerances[key] = value

    # ------------------------------------------------------------------
    # Operators and their derivatives
    # ------------------------------------------------------------------

    def dispersion(self, model: ModelSpec, x) -> SymOperator:
        """C(x) = Sigma(x) Sigma(x)^T."""
        return self.toolkit.as_operator(model.dispersion(x))

    def projection(self, model: ModelSpec, x, mode: str = 'range_proj') -> np.ndarray:
        """P_C(x), either from the range projector or as C C^+."""
        c_matrix = model.dispersion(x)
        if mode == 'range_proj':
            return self.toolkit.range_proj(c_matrix).entries
        if mode == 'pinv_product':
            return c_matrix @ self.toolkit.pinv(c_matrix).entries
        raise ValueError(f"unknown projection mode '{mode}'")

    def _dispersion_partials(self, model, x):
        return partials(model.dispersion, x, self.tolerances['fd_step'])

    def _sigma_partials(self, model, x):
        return partials(model.sigma, x, self.tolerances['fd_step'])

    def trace_form(self, model: ModelSpec, x, u, projection: str = 'range_proj') -> float:
        """Tr(J_Cu(x) P_C(x)) with J_Cu the Jacobian of y -> C(y) u."""
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        jac = jacobian(lambda y: model.dispersion(y) @ u, x, self.tolerances['fd_step'])
        return float(np.trace(jac @ self.projection(model, x, projection)))

    def direct_series(self, model: ModelSpec, x, u, projection: str = 'range_proj') -> float:
        """Truncated sum over j of <u, DC^j(x) (C C^+)^j(x)>."""
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        d_c = self._dispersion_partials(model, x)
        proj = self.projection(model, x, projection)
        total = 0.0
        for j in range(model.dim):
            # DC^j(x)[w] = sum_l w_l dC/dy_l e_j
            derivative = np.einsum('lk,l->k', d_c[:, :, j], proj[:, j])
            total += float(u @ derivative)
        return total

    def stratonovich_series(self, model: ModelSpec, x, u) -> float:
        """Truncated sum over j of <u, D sigma^j(x) sigma^j(x)>."""
        self._require_sigma_form(model, x)
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        return float(np.einsum('i,lij,lj->', u, self._sigma_partials(model, x), model.sigma(x)))

    def _require_sigma_form(self, model, x):
        if not model.sigma_form_available(x):
            raise ModelSpecError(
                f"sigma-form unavailable at {np.asarray(x).tolist()}: C-field is rank deficient"
            )

    # ------------------------------------------------------------------
    # Pointwise conditions
    # ------------------------------------------------------------------

    def corrected_drift_C(self, model: ModelSpec, x, u, projection: str = 'range_proj') -> float:
        """<u, b(x)> - 1/2 Tr(J_Cu(x) P_C(x))."""
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        c_matrix = model.dispersion(x)
        if self.toolkit.rank_ambiguous(c_matrix):
            logger.warning("Rank of C(%s) is within the ambiguity band of rank_tol", x.tolist())
        return float(u @ model.drift(x)) - 0.5 * self.trace_form(model, x, u, projection)

    def corrected_drift_sigma(self, model: ModelSpec, x, u) -> float:
        """<u, b(x)> - 1/2 sum_j <u, D sigma^j(x) sigma^j(x)>."""
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        return float(u @ model.drift(x)) - 0.5 * self.stratonovich_series(model, x, u)

    def corrected_drift_vector(self, model: ModelSpec, x, form: str = 'C') -> np.ndarray:
        """a_C(x) = b - 1/2 sum_j DC^j P_C^j, or a_sigma(x) = b - 1/2 sum_j D sigma^j sigma^j."""
        x = np.asarray(x, dtype=float)
        if form == 'C':
            correction = np.einsum('lij,lj->i', self._dispersion_partials(model, x),
                                   self.projection(model, x))
        elif form == 'sigma':
            self._require_sigma_form(model, x)
            correction = np.einsum('lij,lj->i', self._sigma_partials(model, x), model.sigma(x))
        else:
            raise ValueError(f"unknown drift form '{form}'")
        return model.drift(x) - 0.5 * correction

    def series_equality_check(self, model: ModelSpec, x, u) -> Dict:
        """Compare the trace-form series with the Stratonovich series at (x, u)."""
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        sigma = model.sigma(x)
        sigma_norm = float(np.linalg.norm(sigma, 2)) if sigma.size else 0.0
        kernel_residual = float(np.linalg.norm(sigma.T @ u))
        in_kernel = kernel_residual <= self.tolerances['tol_eq'] * (1.0 + sigma_norm) * max(1.0, np.linalg.norm(u))

        lhs = self.trace_form(model, x, u)
        rhs = self.stratonovich_series(model, x, u)
        return {
            'x': x.tolist(),
            'u': u.tolist(),
            'lhs': lhs,
            'rhs': rhs,
            'residual': abs(lhs - rhs),
            'u_in_kernel': bool(in_kernel),
            'kernel_residual': kernel_residual,
        }

    def generator_apply(self, model: ModelSpec, phi, x, gradient_fn: Optional[Callable] = None,
                        hessian_fn: Optional[Callable] = None) -> float:
        """<D phi(x), b(x)> + 1/2 Tr(D^2 phi(x) C(x))."""
        x = np.asarray(x, dtype=float)
        function = _scalar_function(phi)
        grad = (np.asarray(gradient_fn(x), dtype=float) if gradient_fn is not None
                else gradient(function, x, self.tolerances['fd_step']))
        hess = (np.asarray(hessian_fn(x), dtype=float) if hessian_fn is not None
                else hessian(function, x, self.tolerances['fd_step_hessian']))
        value = float(grad @ model.drift(x)) + 0.5 * float(np.trace(hess @ model.dispersion(x)))
        if not np.isfinite(value):
            raise FiniteDifferenceError(f"generator value is not finite at {x.tolist()}")
        return value

    def second_order_check(self, model: ModelSpec, x, pair: NormalPair) -> float:
        """<u, b(x)> + 1/2 Tr(v C(x)); compare against tol_ineq."""
        x = np.asarray(x, dtype=float)
        return float(pair.u @ model.drift(x)) + 0.5 * float(np.trace(pair.v.entries @ model.dispersion(x)))

    def pmp_probe(self, model: ModelSpec, oracle: SetOracle, phi, n_samples: int = 200,
                  radius: float = 1.0, center=None, rng: Optional[np.random.Generator] = None) -> Dict:
        """Maximise phi over sampled D; at a nonnegative maximum check L phi <= tol_ineq."""
        rng = rng if rng is not None else np.random.default_rng(self.seed)
        samples = np.vstack([
            oracle.boundary_samples(n_samples, rng),
            oracle.sample_points(n_samples, radius, rng, center=center),
        ])
        if samples.shape[0] == 0:
            raise SetGeometryError("pmp_probe found no sample points in the set")

        function = _scalar_function(phi)
        values = np.full(samples.shape[0], -np.inf)
        for k, point in enumerate(samples):
            try:
                values[k] = function(point)
            except POINT_ERRORS + (ArithmeticError, ValueError, ExpressionError) as exc:
                logger.debug("Test function undefined at %s: %s", point.tolist(), exc)

        best = int(np.argmax(values))
        result = {'n_samples': int(samples.shape[0]), 'x_hat': samples[best].tolist(),
                  'phi_max': float(values[best])}
        if not values[best] >= 0.0:
            result.update({'probed': False, 'generator_value': None, 'verdict': PASS})
            return result

        generator_value = self.generator_apply(model, phi, samples[best])
        result.update({
            'probed': True,
            'generator_value': generator_value,
            'verdict': FAIL if generator_value > self.tolerances['tol_ineq'] else PASS,
        })
        return result

    def _normals_at(self, oracle, x, normals, rng):
        if normals is None:
            return self.cone_analyzer.normal_cone_samples(oracle, x, self.normals_per_point, rng=rng)
        unit = []
        for u in normals:
            u = np.asarray(u, dtype=float).reshape(-1)
            norm = np.linalg.norm(u)
            if norm > 0:
                unit.append(u / norm)
        return unit

    def _tangent_columns(self, model, tangent_field, y):
        if isinstance(tangent_field, str) and tangent_field == 'sigma':
            return model.sigma(y)
        return np.asarray(tangent_field(y), dtype=float)

    def check_point(self, model: ModelSpec, oracle: SetOracle, x, normals: Optional[Sequence] = None,
                    index: int = 0, tangent_field=None,
                    rng: Optional[np.random.Generator] = None) -> PointVerdict:
        """Kernel condition C(x)u = 0 and corrected-drift sign over the normals at x."""
        x = oracle.require_member(x)
        rng = rng if rng is not None else np.random.default_rng([self.seed, index])
        normals = self._normals_at(oracle, x, normals, rng)

        c_matrix = model.dispersion(x)
        decomp = self.toolkit.spectral(c_matrix)
        verdict = PointVerdict(
            index=index, x=x, normals=normals,
            rank=decomp.rank(self.toolkit.rank_tol),
            rank_ambiguous=self.toolkit.rank_ambiguous(c_matrix),
            dispersion_norm=float(np.max(np.abs(decomp.eigenvalues))) if decomp.eigenvalues.size else 0.0,
        )
        if not normals:
            verdict.message = 'no normals at this point'
            return verdict

        drift = model.drift(x)
        a_c = self.corrected_drift_vector(model, x, 'C')
        verdict.kernel_residuals = [float(np.linalg.norm(c_matrix @ u)) for u in normals]
        verdict.drift_values = [float(u @ a_c) for u in normals]

        if model.sigma_form_available(x):
            a_sigma = self.corrected_drift_vector(model, x, 'sigma')
            verdict.sigma_drift_values = [float(u @ a_sigma) for u in normals]

        if tangent_field is not None:
            sigma = model.sigma(x)
            curvature_values = []
            for u in normals:
                total = 0.0
                for j in range(model.dim):
                    column = (lambda y, j=j: self._tangent_columns(model, tangent_field, y)[:, j])
                    total += self.cone_analyzer.curvature(column, x, u, sigma[:, j])
                curvature_values.append(float(u @ drift) + 0.5 * total)
            verdict.curvature_drift_values = curvature_values

        verdict.drift_tangent = self.cone_analyzer.tangent_test(oracle, x, a_c)
        kernel_bound = self.tolerances['tol_eq'] * (1.0 + verdict.dispersion_norm)
        verdict.pass_kernel = all(r <= kernel_bound for r in verdict.kernel_residuals)
        verdict.pass_drift = all(d <= self.tolerances['tol_ineq'] for d in verdict.drift_values)

        if verdict.rank_ambiguous:
            verdict.verdict = INCONCLUSIVE
            verdict.message = 'rank of C(x) is ambiguous under rank_tol'
        elif verdict.pass_kernel and verdict.pass_drift:
            verdict.verdict = PASS
        else:
            verdict.verdict = FAIL
        logger.debug("Point %d at %s: %s", index, x.tolist(), verdict.verdict)
        return verdict

    def _safe_check_point(self, model, oracle, x, index, tangent_field):
        try:
            return self.check_point(model, oracle, x, index=index, tangent_field=tangent_field)
        except POINT_ERRORS as exc:
            logger.warning("Point %d could not be checked: %s", index, exc)
            return PointVerdict(index=index, x=np.asarray(x, dtype=float), verdict=INCONCLUSIVE,
                                message=str(exc))

    def check_set(self, model: ModelSpec, oracle: SetOracle, n_points: int = 50,
                  points: Optional[Sequence] = None, tangent_field=None,
                  rng: Optional[np.random.Generator] = None) -> CheckReport:
        """Run check_point over boundary samples (or given points) and aggregate."""
        rng = rng if rng is not None else np.random.default_rng(self.seed)
        if points is None:
            points = oracle.boundary_samples(n_points, rng)
        points = np.asarray(points, dtype=float).reshape(-1, oracle.dim)

        warnings: List[str] = []
        if points.shape[0] == 0:
            message = f"no boundary points sampled for {oracle.kind}; vacuous pass"
            logger.warning(message)
            warnings.append(message)

        def run(item):
            index, x = item
            return self._safe_check_point(model, oracle, x, index, tangent_field)

        items = list(enumerate(points))
        if self.threads > 1 and len(items) > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                verdicts = list(pool.map(run, items))
        else:
            verdicts = [run(item) for item in items]

        report = CheckReport(model.describe(), oracle.describe(), verdicts,
                             diagnostics=self._set_diagnostics(model, verdicts), warnings=warnings)
        logger.info("check_set on %s: %s over %d points", oracle.kind, report.verdict, len(verdicts))
        return report

    def _set_diagnostics(self, model, verdicts) -> Dict:
        ranks = Counter(str(v.rank) for v in verdicts)
        tail = 0.0
        worst_audit = {'symmetry_defect': 0.0, 'min_eigenvalue': 0.0}
        for v in verdicts:
            try:
                sigma = model.sigma(v.x)
                audit = model.audit_sigma(v.x)
            except POINT_ERRORS + (ArithmeticError, ValueError):
                continue
            total = float(np.linalg.norm(sigma))
            if total > 0:
                tail = max(tail, float(np.linalg.norm(sigma[:, -1])) / total)
            worst_audit['symmetry_defect'] = max(worst_audit['symmetry_defect'], audit['symmetry_defect'])
            worst_audit['min_eigenvalue'] = min(worst_audit['min_eigenvalue'], audit['min_eigenvalue'])
        return {
            'fd_step': self.tolerances['fd_step'],
            'fd_step_hessian': self.tolerances['fd_step_hessian'],
            'rank_profile': dict(sorted(ranks.items())),
            'ambiguous_points': sum(1 for v in verdicts if v.rank_ambiguous),
            'tail_mode_fraction': tail,
            'sigma_audit': worst_audit,
            'positive_part': model.positive_part,
        }

    # ------------------------------------------------------------------
    # Manifolds and audits
    # ------------------------------------------------------------------

    def manifold_check(self, model: ModelSpec, manifold: ParametrizedManifold,
                       params_list: Sequence) -> Dict:
        """Columns of Sigma in T_xM (T_x dM on the boundary); a_C in T_xM ((T_xM)_+ on the boundary)."""
        results = []
        for params in params_list:
            try:
                cones = self.cone_analyzer.manifold_cones(manifold, params)
                x = cones['point']
                sigma = model.sigma(x)
                column_tol = self.tolerances['tol_eq'] * (1.0 + float(np.linalg.norm(sigma)))
                columns_ok = all(
                    self.cone_analyzer.in_manifold_tangent(cones, sigma[:, j], column_tol,
                                                           boundary=cones['on_boundary'])
                    for j in range(model.dim)
                )
                a_c = self.corrected_drift_vector(model, x, 'C')
                drift_tol = self.tolerances['tol_ineq']
                if cones['on_boundary']:
                    drift_ok = self.cone_analyzer.in_manifold_half_tangent(cones, a_c, drift_tol)
                else:
                    drift_ok = self.cone_analyzer.in_manifold_tangent(cones, a_c, drift_tol)
                verdict = PASS if columns_ok and drift_ok else FAIL
                results.append({
                    'params': np.asarray(params, dtype=float).tolist(),
                    'x': x.tolist(),
                    'on_boundary': cones['on_boundary'],
                    'sigma_tangent': columns_ok,
                    'drift_tangent': drift_ok,
                    'corrected_drift': a_c.tolist(),
                    'verdict': verdict,
                })
            except POINT_ERRORS as exc:
                logger.warning("Manifold point %s could not be checked: %s", params, exc)
                results.append({'params': np.asarray(params, dtype=float).tolist(),
                                'verdict': INCONCLUSIVE, 'message': str(exc)})
        return {
            'verdict': aggregate_verdict(item['verdict'] for item in results),
            'points': results,
        }

    def linear_growth_audit(self, model: ModelSpec, points) -> Dict:
        """Smallest L with |b(x)| + |Sigma(x)|_HS <= L (1 + |x|) on the samples."""
        points = np.asarray(points, dtype=float).reshape(-1, model.dim)
        worst, worst_point = 0.0, None
        for x in points:
            ratio = (np.linalg.norm(model.drift(x)) + np.linalg.norm(model.sigma(x))) / (1.0 + np.linalg.norm(x))
            if ratio > worst:
                worst, worst_point = float(ratio), x.tolist()
        return {'constant': worst, 'worst_point': worst_point, 'n_points': int(points.shape[0])}
