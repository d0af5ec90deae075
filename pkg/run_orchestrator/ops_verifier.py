"""
InvarLab - Operations Verifier
Built-in property suites for the operator, cone and series computations
"""

import logging
from typing import Callable, Dict, Iterable, Optional

import numpy as np

from invariance_checker import FAIL, PASS, InvarianceChecker, aggregate_verdict, build_builtin
from operator_toolkit import OperatorToolkit
from set_geometry import ConeAnalyzer, SetOracle

from .run_config import DEFAULT_SEED, ConfigError

logger = logging.getLogger(__name__)

SUITE_NAMES = ('penrose', 'powers_stormer', 'eigenvalue_lipschitz', 'cone_formulas', 'series_identities')

# Additive error injected into the targeted suite by the perturbation hook
PERTURBATION = 1e-3


class OpsVerifier:
    """Runs property suites over seeded random inputs and reports worst residuals."""

    def __init__(self, seed: int = DEFAULT_SEED, trials: int = 200, perturb: Optional[str] = None):
        if perturb is not None and perturb not in SUITE_NAMES:
            raise ConfigError(f"unknown suite '{perturb}'", 'perturb')
        self.seed = int(seed)
        self.trials = int(trials)
        self.perturb = perturb
        self.toolkit = OperatorToolkit()
        self.suites: Dict[str, Callable] = {
            'penrose': self.check_penrose,
            'powers_stormer': self.check_powers_stormer,
            'eigenvalue_lipschitz': self.check_eigenvalue_lipschitz,
            'cone_formulas': self.check_cone_formulas,
            'series_identities': self.check_series_identities,
        }

    def noise(self, suite: str) -> float:
        return PERTURBATION if self.perturb == suite else 0.0

    def rng(self, suite: str) -> np.random.Generator:
        return np.random.default_rng([self.seed, SUITE_NAMES.index(suite)])

    def run(self, selection: Optional[Iterable[str]] = None) -> Dict:
        """Run the selected suites (all by default); an explicitly empty selection is an error."""
        names = list(SUITE_NAMES) if selection is None else list(selection)
        if not names:
            raise ConfigError("no suites selected", 'suite')
        unknown = [name for name in names if name not in self.suites]
        if unknown:
            raise ConfigError(f"unknown suite(s) {', '.join(unknown)} (known: {', '.join(SUITE_NAMES)})",
                              'suite')

        results = {}
        for name in names:
            logger.info("Running suite %s", name)
            result = self.suites[name](self.rng(name))
            result['verdict'] = PASS if result['violations'] == 0 else FAIL
            results[name] = result
            logger.info("Suite %s: %s (%d/%d violations)", name, result['verdict'],
                        result['violations'], result['count'])
        return {
            'seed': self.seed,
            'suites': results,
            'verdict': aggregate_verdict(result['verdict'] for result in results.values()),
        }

    # ------------------------------------------------------------------

    def check_penrose(self, rng) -> Dict:
        """AXA = A, XAX = X, AX and XA symmetric for X = pinv(A) on PSD A of every rank."""
        violations, worst = 0, 0.0
        noise = self.noise('penrose')
        for _ in range(self.trials):
            dim = int(rng.integers(1, 51))
            rank = int(rng.integers(0, dim + 1))
            matrix = self.toolkit.random_psd(rng, dim, rank)
            inverse = self.toolkit.pinv(matrix).entries + noise * np.eye(dim)
            residuals = self.toolkit.penrose_residuals(matrix, inverse)
            scale = 1.0 + self.toolkit.norms(matrix)['operator']
            relative = max(residuals.values()) / scale
            worst = max(worst, relative)
            if relative > 1e-9:
                violations += 1
        return {'count': self.trials, 'violations': violations, 'worst_residual': worst}

    def check_powers_stormer(self, rng) -> Dict:
        """||T^1/2 - S^1/2||_HS^2 <= ||T - S||_1 for PSD T, S."""
        violations, worst = 0, -np.inf
        noise = self.noise('powers_stormer')
        for _ in range(self.trials):
            dim = int(rng.integers(1, 21))
            t = self.toolkit.random_psd(rng, dim, int(rng.integers(0, dim + 1)))
            s = self.toolkit.random_psd(rng, dim, int(rng.integers(0, dim + 1)))
            root_gap = self.toolkit.sqrt_abs(t).entries - self.toolkit.sqrt_abs(s).entries
            lhs = float(np.sum(root_gap ** 2)) + noise
            rhs = self.toolkit.norms(t.entries - s.entries)['nuclear']
            worst = max(worst, lhs - rhs)
            if lhs > rhs + 1e-10:
                violations += 1
        return {'count': self.trials, 'violations': violations, 'worst_residual': float(worst)}

    def check_eigenvalue_lipschitz(self, rng) -> Dict:
        """sum_k |mu_k(T) - mu_k(S)| <= ||T - S||_1.

        PSD pairs use the toolkit's |mu| ordering; indefinite pairs use signed
        descending order, since |mu| ordering breaks the bound there.
        """
        violations, worst = 0, -np.inf
        noise = self.noise('eigenvalue_lipschitz')
        for trial in range(self.trials):
            dim = int(rng.integers(1, 21))
            if trial % 2 == 0:
                t = self.toolkit.random_psd(rng, dim, int(rng.integers(0, dim + 1)))
                s = self.toolkit.random_psd(rng, dim, int(rng.integers(0, dim + 1)))
                mu_t = self.toolkit.spectral(t).eigenvalues
                mu_s = self.toolkit.spectral(s).eigenvalues
            else:
                t = self.toolkit.random_symmetric(rng, dim)
                s = self.toolkit.random_symmetric(rng, dim)
                mu_t = np.sort(self.toolkit.spectral(t).eigenvalues)[::-1]
                mu_s = np.sort(self.toolkit.spectral(s).eigenvalues)[::-1]
            lhs = float(np.sum(np.abs(mu_t - mu_s))) + noise
            rhs = self.toolkit.norms(t.entries - s.entries)['nuclear']
            worst = max(worst, lhs - rhs)
            if lhs > rhs + 1e-10:
                violations += 1
        return {'count': self.trials, 'violations': violations, 'worst_residual': float(worst)}

    def check_cone_formulas(self, rng) -> Dict:
        """Closed-form normal and tangent cones agree with the proximal and distance probes."""
        analyzer = ConeAnalyzer(seed=self.seed)
        noise = self.noise('cone_formulas')
        count, violations = 0, 0

        oracles = [
            SetOracle.orthant(3),
            SetOracle.half_space([1.0, -2.0, 0.5], 0.3),
            SetOracle.ball([0.5, -0.5], 1.5),
        ]
        for oracle in oracles:
            for x in oracle.boundary_samples(10, rng):
                analytic = oracle.analytic_normal_cone(x)
                for u in analytic:
                    # analytic normals pass, their negatives are rejected
                    count += 2
                    if not analyzer.prox_normal_test(oracle, x, u + noise, 0.5):
                        violations += 1
                    if analyzer.prox_normal_test(oracle, x, -u, 0.5):
                        violations += 1
                sampled = analyzer.normal_cone_samples(oracle, x, k=4, rng=rng, analytic=False)
                count += 1
                if not analyzer.normals_in_cone(sampled, analytic, tol=1e-4):
                    violations += 1

                for v in rng.standard_normal((5, oracle.dim)):
                    margins = [abs(float(u @ v)) for u in analytic]
                    if margins and min(margins) < 1e-2 * np.linalg.norm(v):
                        continue
                    count += 1
                    if analyzer.tangent_test(oracle, x, v) != oracle.analytic_tangent(x, v):
                        violations += 1

        # cusp of the power graph: downward normal only
        graph = SetOracle.power_graph(1.5)
        origin = np.zeros(2)
        count += 2
        if not analyzer.prox_normal_test(graph, origin, np.array([0.0, -1.0 + noise]), 0.1):
            violations += 1
        if analyzer.prox_normal_test(graph, origin, np.array([0.0, 1.0]), 0.1):
            violations += 1
        return {'count': count, 'violations': violations, 'worst_residual': float(violations)}

    def check_series_identities(self, rng) -> Dict:
        """Direct series against the trace form at random points of three catalogue models."""
        checker = InvarianceChecker(seed=self.seed)
        noise = self.noise('series_identities')
        models = [
            build_builtin('linear_sigma', dim=3, scale=0.7),
            build_builtin('orthant_diag', drift=[0.2, 0.1], scales=[1.0, 0.5]),
            build_builtin('rank_one_plane', amplitude=0.5),
        ]
        violations, worst, count = 0, 0.0, 0
        for model in models:
            for _ in range(max(1, 50 // len(models) + 1)):
                x = rng.uniform(-1.0, 1.0, model.dim)
                u = rng.standard_normal(model.dim)
                trace = checker.trace_form(model, x, u)
                direct = checker.direct_series(model, x, u) + noise
                relative = abs(direct - trace) / (1.0 + abs(trace))
                worst = max(worst, relative)
                count += 1
                if relative > 1e-8:
                    violations += 1
        return {'count': count, 'violations': violations, 'worst_residual': worst}
