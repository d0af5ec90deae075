"""
InvarLab - Path Simulator
Euler-Maruyama ensembles under truncated Q-Wiener noise, invariance statistics,
double-integral scaling estimates and RK4 viability integration
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import linalg
from sklearn.linear_model import LinearRegression

from field_expressions import ExpressionError
from operator_toolkit import OperatorToolkit

from .random_streams import STREAM_DOUBLE_INTEGRAL, STREAM_PATHS, chunk_normals

logger = logging.getLogger(__name__)


class SimulationError(Exception):
    """Raised for invalid simulation settings or unusable results."""


@dataclass(frozen=True)
class SimConfig:
    """Step h, horizon T, path count and seed for one ensemble."""

    h: float
    horizon: float
    n_paths: int
    seed: int = 20240101
    scheme: str = 'euler'
    c_band: float = 5.0
    threads: int = 1
    chunk_size: int = 256

    def __post_init__(self):
        if not self.h > 0:
            raise SimulationError("step h must be positive")
        if self.horizon < self.h:
            raise SimulationError("horizon must be at least one step")
        if self.n_paths < 1:
            raise SimulationError("n_paths must be at least 1")
        if self.scheme != 'euler':
            raise SimulationError(f"unknown scheme '{self.scheme}'")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.h))

    @property
    def band(self) -> float:
        return self.c_band * np.sqrt(self.h)


@dataclass(eq=False)
class PathEnsemble:
    """Stored trajectories; states has shape (n_paths, n_steps + 1, dim)."""

    times: np.ndarray
    states: np.ndarray
    aborted: np.ndarray
    abort_steps: np.ndarray
    config: SimConfig
    diagnostics: Dict = field(default_factory=dict)

    @property
    def n_paths(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[2]

    def to_frame(self) -> pd.DataFrame:
        """Long table with columns t, path, x1..xn."""
        n_paths, n_times, dim = self.states.shape
        frame = pd.DataFrame(self.states.reshape(n_paths * n_times, dim),
                             columns=[f"x{i + 1}" for i in range(dim)])
        frame.insert(0, 'path', np.repeat(np.arange(n_paths), n_times))
        frame.insert(0, 't', np.tile(self.times, n_paths))
        return frame


class PathSimulator:
    """Monte Carlo and ODE layer for cross-checking invariance verdicts."""

    def __init__(self, threads: int = 1, rank_tol: float = 1e-10):
        self.threads = max(1, int(threads))
        self.toolkit = OperatorToolkit(rank_tol=rank_tol)

    def _chunks(self, n_paths, chunk_size):
        return [list(range(start, min(start + chunk_size, n_paths)))
                for start in range(0, n_paths, chunk_size)]

    def _map_chunks(self, function, chunks, threads):
        if threads > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                return list(pool.map(function, chunks))
        return [function(chunk) for chunk in chunks]

    def simulate(self, model, x0, cfg: SimConfig) -> PathEnsemble:
        """X_{k+1} = X_k + b(X_k) h + Sigma(X_k) xi_k sqrt(h); non-finite paths are frozen and flagged."""
        x0 = np.asarray(x0, dtype=float).reshape(-1)
        if x0.shape[0] != model.dim:
            raise SimulationError(f"x0 has length {x0.shape[0]}, model dimension is {model.dim}")
        n_steps = cfg.n_steps
        sqrt_h = np.sqrt(cfg.h)

        def run_chunk(paths):
            normals = chunk_normals(cfg.seed, paths, n_steps, model.dim, STREAM_PATHS)
            states = np.empty((len(paths), n_steps + 1, model.dim))
            states[:, 0] = x0
            aborted = np.zeros(len(paths), dtype=bool)
            abort_steps = np.full(len(paths), -1)
            for k in range(n_steps):
                current = states[:, k]
                with np.errstate(all='ignore'):
                    drift = model.drift_batch(current)
                    sigma = model.sigma_batch(current)
                    step = current + drift * cfg.h + np.einsum('cij,cj->ci', sigma, normals[:, k]) * sqrt_h
                bad = ~np.all(np.isfinite(step), axis=1) & ~aborted
                abort_steps[bad] = k
                aborted |= bad
                states[:, k + 1] = np.where(aborted[:, None], current, step)
            return states, aborted, abort_steps

        chunks = self._chunks(cfg.n_paths, cfg.chunk_size)
        threads = max(self.threads, cfg.threads)
        results = self._map_chunks(run_chunk, chunks, threads)

        ensemble = PathEnsemble(
            times=cfg.h * np.arange(n_steps + 1),
            states=np.concatenate([r[0] for r in results]),
            aborted=np.concatenate([r[1] for r in results]),
            abort_steps=np.concatenate([r[2] for r in results]),
            config=cfg,
            diagnostics={
                'positive_part_sigma': bool(model.positive_part),
                'n_steps': n_steps,
                'scheme': cfg.scheme,
            },
        )
        n_aborted = int(ensemble.aborted.sum())
        ensemble.diagnostics['aborted_paths'] = n_aborted
        if n_aborted:
            logger.warning("%d of %d paths aborted on non-finite field values", n_aborted, cfg.n_paths)
        logger.info("Simulated %d paths x %d steps", cfg.n_paths, n_steps)
        return ensemble

    def path_distances(self, ensemble: PathEnsemble, oracle) -> np.ndarray:
        """d_D(X_t) for every stored state, shape (n_paths, n_steps + 1)."""
        flat = ensemble.states.reshape(-1, ensemble.dim)
        return oracle.distance_batch(flat).reshape(ensemble.n_paths, -1)

    def invariance_stats(self, ensemble: PathEnsemble, oracle, c_band: Optional[float] = None) -> Dict:
        """Per-path maximal distance to D and how often it leaves the c_band sqrt(h) band."""
        c_band = ensemble.config.c_band if c_band is None else float(c_band)
        band = c_band * np.sqrt(ensemble.config.h)
        distances = self.path_distances(ensemble, oracle)
        max_distance = distances.max(axis=1)
        exceeded = distances > band
        exited = exceeded.any(axis=1)
        first_exit = np.where(exited, ensemble.times[np.argmax(exceeded, axis=1)], np.nan)
        return {
            'median_max_distance': float(np.median(max_distance)),
            'max_max_distance': float(np.max(max_distance)),
            'final_distance_median': float(np.median(distances[:, -1])),
            'band': float(band),
            'c_band': c_band,
            'exceed_frequency': float(np.mean(exited)),
            'n_exited': int(exited.sum()),
            'mean_first_exit_time': float(np.nanmean(first_exit)) if exited.any() else None,
            'aborted_paths': int(ensemble.aborted.sum()),
        }

    def double_integral_mc(self, gamma, t_list: Sequence[float], n_paths: int, seed: int,
                           h: float = 1e-3, chunk_size: int = 256) -> List[Dict]:
        """Monte Carlo E[I_t^2] for I_t = sum_ij gamma_ij int int dW^i dW^j."""
        gamma = np.atleast_2d(np.asarray(gamma, dtype=float))
        modes = gamma.shape[0]
        if gamma.shape != (modes, modes):
            raise SimulationError("gamma must be a square matrix")
        t_list = [float(t) for t in t_list]
        if not t_list:
            raise SimulationError("t_list must not be empty")
        checkpoints = {}
        for t in t_list:
            step = int(round(t / h))
            if step < 1:
                raise SimulationError(f"time {t} is shorter than one step h = {h}")
            if step in checkpoints:
                raise SimulationError(f"times {checkpoints[step]} and {t} fall on the same grid step")
            checkpoints[step] = t
        n_steps = max(checkpoints)
        sqrt_h = np.sqrt(h)

        def run_chunk(paths):
            normals = chunk_normals(seed, paths, n_steps, modes, STREAM_DOUBLE_INTEGRAL)
            wiener = np.zeros((len(paths), modes))
            integral = np.zeros(len(paths))
            recorded = {}
            for k in range(n_steps):
                increment = normals[:, k] * sqrt_h
                # pre-increment W keeps the inner integral adapted
                integral += np.einsum('ci,ij,cj->c', wiener, gamma, increment)
                wiener += increment
                if k + 1 in checkpoints:
                    recorded[k + 1] = integral.copy()
            return recorded

        chunks = self._chunks(int(n_paths), chunk_size)
        results = self._map_chunks(run_chunk, chunks, self.threads)

        estimates = []
        for step, t in sorted(checkpoints.items()):
            squares = np.concatenate([r[step] for r in results]) ** 2
            stderr = float(np.std(squares, ddof=1) / np.sqrt(squares.size)) if squares.size > 1 else 0.0
            estimates.append({
                't': t,
                'mean_square': float(np.mean(squares)),
                'stderr': stderr,
                'expected': float(np.sum(gamma ** 2)) * t * t / 2.0,
                'n_paths': int(squares.size),
            })
        return estimates

    @staticmethod
    def delta_scaling_slope(estimates: Sequence[Dict], delta: float) -> float:
        """Slope of log E[(I_t / t^delta)^2] against log t; 2 - 2 delta in theory."""
        times = np.array([e['t'] for e in estimates])
        values = np.array([e['mean_square'] for e in estimates]) / times ** (2.0 * delta)
        if np.any(values <= 0):
            raise SimulationError("scaling regression needs positive second moments")
        regression = LinearRegression().fit(np.log(times)[:, None], np.log(values))
        return float(regression.coef_[0])

    def ode_viability(self, vector_field: Callable, oracle, x0, h: float, horizon: float) -> Dict:
        """Classical RK4 for y' = a(y); distance profile to D along the trajectory."""
        if not h > 0 or horizon < h:
            raise SimulationError("ode_viability needs h > 0 and horizon >= h")
        y = np.asarray(x0, dtype=float).reshape(-1)
        n_steps = int(round(horizon / h))
        states = np.empty((n_steps + 1, y.shape[0]))
        states[0] = y
        aborted_at = None

        def rhs(point):
            return np.asarray(vector_field(point), dtype=float).reshape(-1)

        for k in range(n_steps):
            try:
                k1 = rhs(y)
                k2 = rhs(y + 0.5 * h * k1)
                k3 = rhs(y + 0.5 * h * k2)
                k4 = rhs(y + h * k3)
                candidate = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            except (ArithmeticError, ValueError, ExpressionError) as exc:
                logger.warning("ODE field failed at step %d: %s", k, exc)
                candidate = np.full_like(y, np.nan)
            if not np.all(np.isfinite(candidate)):
                aborted_at = k
                states = states[:k + 1]
                break
            y = candidate
            states[k + 1] = y

        times = h * np.arange(states.shape[0])
        distances = oracle.distance_batch(states)
        return {
            'times': times,
            'states': states,
            'distances': distances,
            'max_distance': float(distances.max()),
            'final_distance': float(distances[-1]),
            'aborted': aborted_at is not None,
            'abort_step': aborted_at,
        }

    def sigma_column_field(self, model, j: int) -> Callable:
        """y -> sigma^j(y) = Sigma(y) e_j."""
        return lambda y: model.sigma(y)[:, j]

    def control_field(self, model, x, j: int) -> Callable:
        """y -> C(y) Sigma(x)^+ e_j."""
        sigma = model.sigma(x)
        if np.allclose(sigma, sigma.T):
            inverse = self.toolkit.pinv(sigma).entries
        else:
            inverse = linalg.pinv(sigma, rtol=self.toolkit.rank_tol)
        direction = inverse[:, j]
        return lambda y: model.dispersion(y) @ direction

    @staticmethod
    def export_csv(ensemble: PathEnsemble, path) -> None:
        ensemble.to_frame().to_csv(path, index=False)
