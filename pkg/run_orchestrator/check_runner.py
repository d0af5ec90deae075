"""
InvarLab - Check Runner
Run the checks named by a RunConfig and write a canonical JSON report
"""

import json
import logging
import os
import tempfile
import time
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

from field_expressions import ExpressionError
from invariance_checker import (
    FAIL,
    INCONCLUSIVE,
    PASS,
    InvarianceChecker,
    aggregate_verdict,
    to_jsonable,
)
from invariance_checker.invariance_checker import POINT_ERRORS
from path_simulator import PathSimulator, SimConfig, SimulationError
from set_geometry import NormalPair

from . import __version__
from .run_config import ConfigError, RunConfig

logger = logging.getLogger(__name__)

EXIT_CODES = {PASS: 0, FAIL: 1, INCONCLUSIVE: 2}
EXIT_CONFIG_ERROR = 64

# Tolerances that decide each check's verdict; copied into its result with their source
CHECK_TOLERANCES = {
    'check_set': ('rank_tol', 'tol_eq', 'tol_ineq', 'fd_step'),
    'check_point': ('rank_tol', 'tol_eq', 'tol_ineq', 'fd_step'),
    'series_equality': ('series_tol', 'tol_eq', 'fd_step'),
    'pmp_probe': ('tol_ineq', 'fd_step', 'fd_step_hessian'),
    'simulate': ('c_band', 'max_exceed_frequency'),
    'double_integral': ('z_max', 'slope_tol'),
    'ode_viability': ('viability_tol',),
    'manifold_check': ('tol_eq', 'tol_ineq', 'fd_step'),
}


def atomic_write(path, writer: Callable) -> None:
    """Write through a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    handle, temp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=str(path.parent))
    try:
        with os.fdopen(handle, 'w', encoding='utf-8', newline='') as stream:
            writer(stream)
        os.replace(temp_name, path)
    except BaseException:
        if os.path.exists(temp_name):
            os.unlink(temp_name)
        raise


def dump_report(report: Dict) -> str:
    return json.dumps(to_jsonable(report), sort_keys=True, indent=2) + '\n'


class CheckRunner:
    """Executes a validated run configuration check by check."""

    def __init__(self, config: RunConfig, threads: int = 1, timings: bool = False):
        self.config = config
        self.threads = max(1, int(threads))
        self.timings = bool(timings)
        self.setup_engines()

    def setup_engines(self):
        values = self.config.tolerance_values()
        self.checker = InvarianceChecker(values, seed=self.config.seed, threads=self.threads)
        self.simulator = PathSimulator(threads=self.threads, rank_tol=values['rank_tol'])
        self.handlers = {
            'check_set': self.run_check_set,
            'check_point': self.run_check_point,
            'series_equality': self.run_series_equality,
            'pmp_probe': self.run_pmp_probe,
            'simulate': self.run_simulate,
            'double_integral': self.run_double_integral,
            'ode_viability': self.run_ode_viability,
            'manifold_check': self.run_manifold_check,
        }

    def tol(self, key: str) -> float:
        return self.config.tolerances[key]['value']

    def check_rng(self, index: int) -> np.random.Generator:
        """Each check gets its own stream so reordering checks changes nothing else."""
        return np.random.default_rng([self.config.seed, index])

    def run(self) -> Dict:
        """Run every configured check and build the report."""
        results = []
        timings = {}
        for index, check in enumerate(self.config.checks):
            name = check['name']
            logger.info("Running check %d: %s", index, name)
            started = time.perf_counter()
            try:
                result = self.handlers[name](check, self.check_rng(index))
            except ConfigError:
                raise
            except (KeyError, TypeError) as exc:
                # parameters are read lazily, so a bad check block surfaces here
                raise ConfigError(f"missing or malformed parameter {exc}", f"checks[{index}].{name}") from exc
            except POINT_ERRORS + (SimulationError, ExpressionError, ArithmeticError, ValueError) as exc:
                logger.warning("Check %s failed to run: %s", name, exc)
                result = self.get_error_result(str(exc))
            result['name'] = name
            result['index'] = index
            result['tolerances'] = {key: self.config.tolerance(key) for key in CHECK_TOLERANCES[name]}
            results.append(result)
            timings[f"{index}:{name}"] = round(time.perf_counter() - started, 6)
            logger.info("Check %s: %s", name, result['verdict'])

        report = {
            'tool': 'invarlab',
            'version': __version__,
            'config_name': self.config.name,
            'config_digest': self.config.digest,
            'seed': self.config.seed,
            'model': self.config.model.describe(),
            'set': self.config.oracle.describe(),
            'tolerances': self.config.tolerances,
            'checks': results,
            'verdict': aggregate_verdict(result['verdict'] for result in results),
        }
        if self.timings:
            report['wall_times'] = timings
        return to_jsonable(report)

    def write_report(self, report: Dict, out_path) -> None:
        text = dump_report(report)
        atomic_write(out_path, lambda stream: stream.write(text))
        logger.info("Report written to %s", out_path)

    @staticmethod
    def exit_code(report: Dict) -> int:
        return EXIT_CODES[report['verdict']]

    def get_error_result(self, error_message: str) -> Dict:
        """Result structure for a check that could not be evaluated"""
        return {
            'error': True,
            'message': error_message,
            'verdict': INCONCLUSIVE,
        }

    # ------------------------------------------------------------------
    # Invariance checks
    # ------------------------------------------------------------------

    def tangent_field(self, check: Dict, where: str):
        """Only the diffusion columns can be named as a tangent field from a config."""
        value = check.get('tangent_field')
        if value not in (None, 'sigma'):
            raise ConfigError(f"unsupported tangent_field {value!r}, expected 'sigma'", f"{where}.tangent_field")
        return value

    def run_check_set(self, check: Dict, rng) -> Dict:
        points = check.get('points')
        if points is not None:
            points = [self.config.vector(p, 'check_set.points') for p in points]
        report = self.checker.check_set(self.config.model, self.config.oracle,
                                        n_points=int(check.get('n_points', 50)),
                                        points=points, tangent_field=self.tangent_field(check, 'check_set'),
                                        rng=rng)
        result = report.to_dict()
        result['offending_x'] = [point.x.tolist() for point in report.offending_points()]
        if check.get('growth_audit', False) and points is None:
            samples = self.config.oracle.sample_points(int(check.get('n_points', 50)),
                                                       float(check.get('radius', 1.0)), rng)
            result['linear_growth'] = self.checker.linear_growth_audit(self.config.model, samples)
        return result

    def run_check_point(self, check: Dict, rng) -> Dict:
        if 'x' not in check:
            raise ConfigError("missing parameter 'x'", 'check_point')
        x = self.config.vector(check['x'], 'check_point.x')
        normals = check.get('normals')
        if normals is not None:
            normals = [self.config.vector(u, 'check_point.normals') for u in normals]
        verdict = self.checker.check_point(self.config.model, self.config.oracle, x,
                                           normals=normals, tangent_field=self.tangent_field(check, 'check_point'),
                                           rng=rng)
        result = verdict.to_dict()

        second_order = check.get('second_order')
        if second_order:
            pair = NormalPair.build(self.config.vector(second_order['u'], 'check_point.second_order.u'),
                                    second_order.get('v'))
            value = self.checker.second_order_check(self.config.model, x, pair)
            result['second_order_value'] = value
            if value > self.tol('tol_ineq'):
                result['verdict'] = FAIL
        return result

    def run_series_equality(self, check: Dict, rng) -> Dict:
        """Trace form vs Stratonovich series; only kernel directions are compared."""
        model, oracle = self.config.model, self.config.oracle
        probes = []
        if 'probes' in check:
            for probe in check['probes']:
                probes.append((self.config.vector(probe['x'], 'series_equality.probes.x'),
                               [self.config.vector(probe['u'], 'series_equality.probes.u')]))
        else:
            for x in oracle.boundary_samples(int(check.get('n_points', 20)), rng):
                normals = self.checker.cone_analyzer.normal_cone_samples(oracle, x, rng=rng)
                probes.append((x, normals))

        rows = []
        for x, normals in probes:
            for u in normals:
                try:
                    rows.append(self.checker.series_equality_check(model, x, u))
                except POINT_ERRORS as exc:
                    rows.append({'x': np.asarray(x).tolist(), 'u': np.asarray(u).tolist(),
                                 'error': True, 'message': str(exc)})

        compared = [row for row in rows if row.get('u_in_kernel')]
        worst = max((row['residual'] for row in compared), default=0.0)
        if not compared:
            verdict = INCONCLUSIVE
        else:
            verdict = PASS if worst <= self.tol('series_tol') else FAIL
        return {
            'verdict': verdict,
            'n_probes': len(rows),
            'n_compared': len(compared),
            'max_kernel_residual': worst,
            'probes': rows,
        }

    def run_pmp_probe(self, check: Dict, rng) -> Dict:
        """Maximum-principle probes with given test functions or random concave quadratics."""
        n_samples = int(check.get('n_samples', 200))
        radius = float(check.get('radius', 1.0))
        center = check.get('center')
        if center is not None:
            center = self.config.vector(center, 'pmp_probe.center')

        functions = [(text, self.config.parse_scalar(text, 'pmp_probe.phi'))
                     for text in check.get('phi', [])]
        functions.extend(self.random_concave_functions(int(check.get('random_concave', 0)),
                                                       radius, center, rng))
        if not functions:
            raise ConfigError("needs 'phi' expressions or a positive 'random_concave' count", 'pmp_probe')

        probes = []
        for label, phi in functions:
            probe = self.checker.pmp_probe(self.config.model, self.config.oracle, phi,
                                           n_samples=n_samples, radius=radius, center=center, rng=rng)
            probe['phi'] = label
            probes.append(probe)
        generator_values = [p['generator_value'] for p in probes if p['probed']]
        return {
            'verdict': aggregate_verdict(p['verdict'] for p in probes),
            'n_functions': len(probes),
            'n_probed': len(generator_values),
            'max_generator_value': max(generator_values, default=None),
            'probes': probes,
        }

    def random_concave_functions(self, count: int, radius: float, center, rng) -> List:
        """phi(y) = 1 - alpha (|y - c|^2 - |p - c|^2) with c outside D and p its projection."""
        oracle = self.config.oracle
        dim = oracle.dim
        center = np.zeros(dim) if center is None else center
        functions = []
        attempts = 0
        while len(functions) < count and attempts < 50 * max(count, 1):
            attempts += 1
            direction = rng.standard_normal(dim)
            c = center + radius * rng.uniform() * direction / np.linalg.norm(direction)
            p = oracle.project(c)
            offset = float(np.sum((p - c) ** 2))
            if offset < (0.05 * radius) ** 2:
                continue
            alpha = float(rng.uniform(0.5, 2.0))
            label = f"concave(alpha={alpha:.6g}, c={np.round(c, 6).tolist()})"
            functions.append((label, lambda y, c=c, alpha=alpha, offset=offset:
                              1.0 - alpha * (float(np.sum((np.asarray(y) - c) ** 2)) - offset)))
        if len(functions) < count:
            logger.warning("Only %d of %d random test functions could be placed", len(functions), count)
        return functions

    def run_manifold_check(self, check: Dict, rng) -> Dict:
        manifold = self.config.build_manifold(check)
        params_list = check.get('params')
        if params_list is None:
            n_params = int(check.get('n_params', 20))
            low, high = check.get('param_range', [0.0, 2.0 * np.pi])
            params_list = rng.uniform(low, high, (n_params, manifold.param_dim))
        return self.checker.manifold_check(self.config.model, manifold,
                                           np.asarray(params_list, dtype=float).reshape(-1, manifold.param_dim))

    # ------------------------------------------------------------------
    # Simulation checks
    # ------------------------------------------------------------------

    def run_simulate(self, check: Dict, rng) -> Dict:
        if 'x0' not in check:
            raise ConfigError("missing parameter 'x0'", 'simulate')
        x0 = self.config.vector(check['x0'], 'simulate.x0')
        try:
            cfg = SimConfig(h=float(check.get('h', 1e-3)), horizon=float(check.get('horizon', 1.0)),
                            n_paths=int(check.get('n_paths', 1000)), seed=self.config.seed,
                            c_band=self.tol('c_band'), chunk_size=int(check.get('chunk_size', 256)))
        except SimulationError as exc:
            raise ConfigError(str(exc), 'simulate') from exc

        ensemble = self.simulator.simulate(self.config.model, x0, cfg)
        stats = self.simulator.invariance_stats(ensemble, self.config.oracle)
        verdict = PASS if stats['exceed_frequency'] <= self.tol('max_exceed_frequency') else FAIL
        if stats['aborted_paths'] and verdict == PASS:
            verdict = INCONCLUSIVE

        csv_path = check.get('csv') or self.config.output.get('trajectories')
        if csv_path:
            frame = ensemble.to_frame()
            atomic_write(csv_path, lambda stream: frame.to_csv(stream, index=False))
        return {
            'verdict': verdict,
            'x0': x0,
            'h': cfg.h,
            'horizon': cfg.horizon,
            'n_paths': cfg.n_paths,
            'statistics': stats,
            'diagnostics': ensemble.diagnostics,
            'csv': csv_path,
        }

    def run_double_integral(self, check: Dict, rng) -> Dict:
        """Second moments of the iterated Wiener integral against ||gamma||_F^2 t^2 / 2."""
        gamma = np.atleast_2d(np.asarray(check.get('gamma', [[1.0]]), dtype=float))
        t_list = [float(t) for t in check.get('t_list', [0.5, 1.0, 2.0])]
        try:
            estimates = self.simulator.double_integral_mc(
                gamma, t_list, n_paths=int(check.get('n_paths', 20000)), seed=self.config.seed,
                h=float(check.get('h', 1e-3)),
            )
        except SimulationError as exc:
            raise ConfigError(str(exc), 'double_integral') from exc
        z_max = self.tol('z_max')
        for estimate in estimates:
            estimate['z_score'] = (abs(estimate['mean_square'] - estimate['expected']) / estimate['stderr']
                                   if estimate['stderr'] > 0 else 0.0)
            estimate['within'] = estimate['z_score'] <= z_max
        verdict = PASS if all(e['within'] for e in estimates) else FAIL

        result = {'estimates': estimates}
        if 'delta' in check and len(estimates) > 1:
            delta = float(check['delta'])
            slope = self.simulator.delta_scaling_slope(estimates, delta)
            expected_slope = 2.0 - 2.0 * delta
            result['scaling'] = {'delta': delta, 'slope': slope, 'expected_slope': expected_slope}
            if abs(slope - expected_slope) > self.tol('slope_tol'):
                verdict = FAIL
        result['verdict'] = verdict
        return result

    def run_ode_viability(self, check: Dict, rng) -> Dict:
        field, label = self.ode_field(check.get('field', 'corrected_drift'))
        if 'x0' not in check:
            raise ConfigError("missing parameter 'x0'", 'ode_viability')
        x0 = self.config.vector(check['x0'], 'ode_viability.x0')
        trajectory = self.simulator.ode_viability(field, self.config.oracle, x0,
                                                  h=float(check.get('h', 1e-3)),
                                                  horizon=float(check.get('horizon', 10.0)))
        if trajectory['aborted']:
            verdict = INCONCLUSIVE
        else:
            verdict = PASS if trajectory['max_distance'] <= self.tol('viability_tol') else FAIL
        return {
            'verdict': verdict,
            'field': label,
            'x0': x0,
            'max_distance': trajectory['max_distance'],
            'final_distance': trajectory['final_distance'],
            'n_steps': int(trajectory['states'].shape[0] - 1),
            'aborted': trajectory['aborted'],
            'abort_step': trajectory['abort_step'],
        }

    def ode_field(self, spec):
        """Resolve a field spec: 'drift', 'corrected_drift', expressions or a sigma/control column."""
        model = self.config.model
        if spec == 'drift':
            return model.drift, 'drift'
        if spec == 'corrected_drift':
            return (lambda y: self.checker.corrected_drift_vector(model, y, 'C')), 'corrected_drift'
        if isinstance(spec, list):
            field = self.config.parse_vector_field(spec, 'ode_viability.field')
            return field, field.to_text()
        if isinstance(spec, dict) and 'sigma_column' in spec:
            j = int(spec['sigma_column'])
            return self.simulator.sigma_column_field(model, j), f"sigma_column[{j}]"
        if isinstance(spec, dict) and 'control' in spec:
            j = int(spec['control'])
            x = self.config.vector(spec.get('at', [0.0] * model.dim), 'ode_viability.field.at')
            return self.simulator.control_field(model, x, j), f"control[{j}]"
        raise ConfigError(f"unknown field {spec!r}", 'ode_viability.field')


def run_check_command(config_path, out_path: Optional[str] = None, seed: Optional[int] = None,
                      threads: int = 1, tol_overrides: Optional[Dict] = None,
                      timings: bool = False) -> int:
    """Load, run and write; returns the process exit code."""
    try:
        config = RunConfig.from_file(config_path, cli_overrides=tol_overrides, seed=seed)
        runner = CheckRunner(config, threads=threads, timings=timings)
        report = runner.run()
    except ConfigError as exc:
        logger.error("Config error: %s", exc)
        return EXIT_CONFIG_ERROR

    out_path = out_path or config.output.get('report') or f"{config.name}_report.json"
    runner.write_report(report, out_path)
    return CheckRunner.exit_code(report)
