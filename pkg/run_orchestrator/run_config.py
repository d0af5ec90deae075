"""
InvarLab - Run Configuration
Load a JSON run config into a model, a set oracle, check blocks and sourced tolerances
"""

import hashlib
import json
import logging
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from field_expressions import ExpressionError, ExpressionParser
from invariance_checker import InvarianceChecker, ModelSpec, ModelSpecError, build_builtin
from set_geometry import ConeAnalyzer, ParametrizedManifold, SetGeometryError, SetOracle

logger = logging.getLogger(__name__)

DEFAULT_SEED = 20240101

CHECK_NAMES = (
    'check_set',
    'check_point',
    'series_equality',
    'pmp_probe',
    'simulate',
    'double_integral',
    'ode_viability',
    'manifold_check',
)


class ConfigError(Exception):
    """Raised for unreadable or invalid run configurations; maps to exit code 64."""

    def __init__(self, message, field=None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


def load_default_tolerances() -> Dict:
    """Every tolerance the toolkit reads, with its default value."""
    tolerances = {}
    tolerances.update(ConeAnalyzer.DEFAULT_TOLERANCES)
    tolerances.update(InvarianceChecker.DEFAULT_TOLERANCES)
    tolerances.update({
        'proj_tol': 1e-9,
        'member_tol': 1e-8,
        'c_band': 5.0,
        'series_tol': 5e-5,
        'max_exceed_frequency': 0.05,
        'viability_tol': 1e-6,
        'z_max': 3.0,
        'slope_tol': 0.2,
    })
    return tolerances


def config_digest(raw: Dict) -> str:
    """sha256 of the canonical JSON form of the config."""
    canonical = json.dumps(raw, sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


class RunConfig:
    """A validated run: model, set, checks, seed and tolerances with their sources."""

    def __init__(self, raw: Dict, source_path: Optional[str] = None,
                 cli_overrides: Optional[Dict] = None, seed: Optional[int] = None):
        if not isinstance(raw, dict):
            raise ConfigError("top level must be a JSON object")
        self.raw = raw
        self.source_path = source_path
        self.parser = ExpressionParser()
        self.name = str(raw.get('name', Path(source_path).stem if source_path else 'run'))
        self.digest = config_digest(raw)
        self.setup_seed(seed)
        self.setup_tolerances(cli_overrides or {})
        self.model = self.build_model(raw.get('model'))
        self.oracle = self.build_set(raw.get('set'))
        self.checks = self.build_checks(raw.get('checks'))
        self.output = dict(raw.get('output', {}))

    @classmethod
    def from_file(cls, path, cli_overrides: Optional[Dict] = None, seed: Optional[int] = None) -> 'RunConfig':
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding='utf-8'))
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}", 'config') from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}", 'config') from exc
        return cls(raw, str(path), cli_overrides, seed)

    def setup_seed(self, seed):
        """CLI seed beats config seed beats the default."""
        value = seed if seed is not None else self.raw.get('seed', DEFAULT_SEED)
        try:
            value = int(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError("seed must be an integer", 'seed') from exc
        if not 0 <= value < 2 ** 64:
            raise ConfigError("seed must fit in 64 bits", 'seed')
        self.seed = value

    def setup_tolerances(self, cli_overrides: Dict):
        """Tolerances as {name: {value, source}} with source default, config or cli."""
        defaults = load_default_tolerances()
        self.tolerances = {key: {'value': value, 'source': 'default'} for key, value in defaults.items()}
        for source, overrides in (('config', self.raw.get('tolerances', {})), ('cli', cli_overrides)):
            if not isinstance(overrides, dict):
                raise ConfigError("must be an object", 'tolerances')
            for key, value in overrides.items():
                if value is None:
                    continue
                if key not in self.tolerances:
                    raise ConfigError(f"unknown tolerance '{key}'", f"tolerances.{key}")
                if not isinstance(value, (int, float)) or isinstance(value, bool) or value <= 0:
                    raise ConfigError("must be a positive number", f"tolerances.{key}")
                self.tolerances[key] = {'value': value, 'source': source}

    def tolerance_values(self) -> Dict:
        return {key: entry['value'] for key, entry in self.tolerances.items()}

    def tolerance(self, key: str) -> Dict:
        return dict(self.tolerances[key])

    # ------------------------------------------------------------------

    def build_model(self, block) -> ModelSpec:
        """Builtin catalogue model or expression-defined fields."""
        if not isinstance(block, dict):
            raise ConfigError("missing or not an object", 'model')
        rank_tol = self.tolerances['rank_tol']['value']
        try:
            if 'builtin' in block:
                return build_builtin(block['builtin'], rank_tol=rank_tol, **block.get('params', {}))

            dim = int(block.get('dim', 0))
            if dim < 1:
                raise ConfigError("must be a positive integer", 'model.dim')
            has_sigma, has_c = 'sigma' in block, 'c' in block
            if has_sigma == has_c:
                raise ConfigError("exactly one of 'sigma' or 'c' is required", 'model')
            drift = self.parser.parse_vector(block.get('drift', ['0'] * dim), dim)
            matrix_key = 'sigma' if has_sigma else 'c'
            matrix = self.parser.parse_matrix(block[matrix_key], dim)
            return ModelSpec(
                dim, drift,
                sigma_field=matrix if has_sigma else None,
                c_field=matrix if has_c else None,
                q_eigs=block.get('q_eigs'),
                name=str(block.get('name', self.name)),
                positive_part=bool(block.get('positive_part', False)),
                rank_tol=rank_tol,
            )
        except ExpressionError as exc:
            raise ConfigError(str(exc), 'model') from exc
        except ModelSpecError as exc:
            raise ConfigError(str(exc), 'model') from exc

    def build_set(self, block) -> SetOracle:
        """Tagged set object: kind plus parameters."""
        if not isinstance(block, dict) or 'kind' not in block:
            raise ConfigError("missing or without 'kind'", 'set')
        kind = block['kind']
        dim = int(block.get('dim', self.model.dim))
        try:
            if kind == 'orthant':
                oracle = SetOracle.orthant(dim)
            elif kind == 'half_space':
                oracle = SetOracle.half_space(block['a'], block.get('c', 0.0))
            elif kind == 'ball':
                oracle = SetOracle.ball(block.get('center', [0.0] * dim), block['r'])
            elif kind == 'sphere':
                oracle = SetOracle.sphere(block.get('center', [0.0] * dim), block['r'])
            elif kind == 'polyhedral_cone':
                oracle = SetOracle.polyhedral_cone(dim, facets=block.get('facets'),
                                                   generators=block.get('generators'))
            elif kind == 'power_graph':
                oracle = SetOracle.power_graph(block.get('p', 1.5))
            elif kind == 'whole_space':
                oracle = SetOracle.whole_space(dim)
            elif kind == 'custom':
                constraints = [expr.eval for expr in
                               (self.parser.parse(text, dim) for text in block.get('constraints', []))]
                oracle = SetOracle.custom(
                    dim, constraints=constraints,
                    sample_center=block.get('sample_center'),
                    sample_radius=block.get('sample_radius', 1.0),
                    proj_tol=self.tolerances['proj_tol']['value'],
                )
            else:
                raise ConfigError(f"unknown kind '{kind}' (known: {', '.join(SetOracle.KINDS)})", 'set.kind')
        except KeyError as exc:
            raise ConfigError(f"missing parameter {exc}", 'set') from exc
        except (SetGeometryError, ExpressionError) as exc:
            raise ConfigError(str(exc), 'set') from exc

        if oracle.dim != self.model.dim:
            raise ConfigError(f"set dimension {oracle.dim} differs from model dimension {self.model.dim}", 'set')
        oracle.member_tol = self.tolerances['member_tol']['value']
        return oracle

    def build_checks(self, block) -> List[Dict]:
        """Validate check names; parameters are read when each check runs."""
        if not isinstance(block, list) or not block:
            raise ConfigError("must be a non-empty list", 'checks')
        checks = []
        for index, check in enumerate(block):
            if isinstance(check, str):
                check = {'name': check}
            if not isinstance(check, dict) or 'name' not in check:
                raise ConfigError("each check needs a 'name'", f"checks[{index}]")
            if check['name'] not in CHECK_NAMES:
                raise ConfigError(
                    f"unknown check '{check['name']}' (known: {', '.join(CHECK_NAMES)})",
                    f"checks[{index}].name",
                )
            checks.append(dict(check))
        return checks

    def build_manifold(self, check: Dict) -> ParametrizedManifold:
        """Chart phi from expressions over the parameters x1..xm."""
        try:
            param_dim = int(check['param_dim'])
            chart = self.parser.parse_vector(check['parametrization'], param_dim)
        except KeyError as exc:
            raise ConfigError(f"missing parameter {exc}", 'manifold_check') from exc
        except ExpressionError as exc:
            raise ConfigError(str(exc), 'manifold_check.parametrization') from exc
        bounds = [tuple(pair) for pair in check.get('bounds', [[None, None]] * param_dim)]
        return ParametrizedManifold(chart, param_dim, self.model.dim, bounds=bounds,
                                    fd_step=self.tolerances['fd_step']['value'] * 0.1)

    def parse_scalar(self, text, field: str):
        try:
            return self.parser.parse(text, self.model.dim)
        except ExpressionError as exc:
            raise ConfigError(str(exc), field) from exc

    def parse_vector_field(self, texts, field: str):
        try:
            return self.parser.parse_vector(texts, self.model.dim)
        except ExpressionError as exc:
            raise ConfigError(str(exc), field) from exc

    def parse_matrix_field(self, rows, field: str):
        try:
            return self.parser.parse_matrix(rows, self.model.dim)
        except ExpressionError as exc:
            raise ConfigError(str(exc), field) from exc

    def vector(self, value, field: str, length: Optional[int] = None) -> np.ndarray:
        try:
            array = np.asarray(value, dtype=float).reshape(-1)
        except (TypeError, ValueError) as exc:
            raise ConfigError("must be a list of numbers", field) from exc
        expected = self.model.dim if length is None else length
        if array.shape[0] != expected:
            raise ConfigError(f"expected {expected} entries, got {array.shape[0]}", field)
        return array
