"""
InvarLab - Model Specification
Truncated Hilbert-space diffusions dX = b(X) dt + sigma(X) dW with Q-Wiener noise
"""

import logging
from typing import Dict, Optional

import numpy as np

from field_expressions import CallableField
from operator_toolkit import OperatorToolkit

logger = logging.getLogger(__name__)


class ModelSpecError(Exception):
    """Raised for inconsistent or unusable model definitions."""


class ModelSpec:
    """Drift b, diffusion (sigma-field or C-field) and Q eigenvalues on R^n.

    A sigma-field gives sigma(x) in the e-basis; the operator used everywhere
    is Sigma(x) = sigma(x) Q^(1/2). A C-field gives C(x) directly and
    Sigma(x) is taken as |C(x)|^(1/2).
    """

    def __init__(self, dim: int, drift, sigma_field=None, c_field=None, q_eigs=None,
                 name: str = 'model', builtin: Optional[str] = None, params: Optional[Dict] = None,
                 positive_part: bool = False, rank_tol: float = 1e-10):
        self.dim = int(dim)
        if self.dim < 1:
            raise ModelSpecError("model dimension must be positive")
        if (sigma_field is None) == (c_field is None):
            raise ModelSpecError("exactly one of sigma_field or c_field must be given")

        self.drift_field = drift
        self.sigma_field = sigma_field
        self.c_field = c_field
        self.q_eigs = np.ones(self.dim) if q_eigs is None else np.asarray(q_eigs, dtype=float).reshape(-1)
        self.name = name
        self.builtin = builtin
        self.params = dict(params or {})
        self.positive_part = bool(positive_part)
        self.toolkit = OperatorToolkit(rank_tol=rank_tol)
        self.validate_shapes()

    def validate_shapes(self):
        """Field shapes must agree with dim and q_eigs."""
        if self.q_eigs.shape[0] != self.dim:
            raise ModelSpecError(f"q_eigs has {self.q_eigs.shape[0]} entries, expected {self.dim}")
        if np.any(self.q_eigs <= 0):
            raise ModelSpecError("q_eigs must be positive")
        if tuple(self.drift_field.shape) != (self.dim,):
            raise ModelSpecError(f"drift has shape {self.drift_field.shape}, expected ({self.dim},)")
        matrix = self.sigma_field if self.sigma_field is not None else self.c_field
        if tuple(matrix.shape) != (self.dim, self.dim):
            raise ModelSpecError(f"diffusion field has shape {matrix.shape}, expected ({self.dim}, {self.dim})")

    @property
    def diffusion_kind(self) -> str:
        return 'sigma' if self.sigma_field is not None else 'c'

    def describe(self) -> Dict:
        info = {
            'name': self.name,
            'dim': self.dim,
            'q_eigs': self.q_eigs.tolist(),
            'diffusion': self.diffusion_kind,
        }
        if self.builtin:
            info['builtin'] = self.builtin
            info['params'] = self.params
        return info

    def drift(self, x) -> np.ndarray:
        return np.asarray(self.drift_field(np.asarray(x, dtype=float)), dtype=float).reshape(self.dim)

    def drift_batch(self, points) -> np.ndarray:
        return self.drift_field.batch(points)

    def diffusion_state(self, x):
        """State at which the diffusion is read: x itself, or x+ for square-root models."""
        x = np.asarray(x, dtype=float)
        return np.maximum(x, 0.0) if self.positive_part else x

    def sigma(self, x) -> np.ndarray:
        """Sigma(x) as a dense n x n matrix."""
        x = self.diffusion_state(x)
        if self.sigma_field is not None:
            return np.asarray(self.sigma_field(x), dtype=float) * np.sqrt(self.q_eigs)
        return self.toolkit.sqrt_abs(self.c_field(x)).entries.copy()

    def sigma_batch(self, points) -> np.ndarray:
        """Sigma over an (m, n) array; rows with domain errors are NaN."""
        points = self.diffusion_state(np.atleast_2d(np.asarray(points, dtype=float)))
        if self.sigma_field is not None:
            return self.sigma_field.batch(points) * np.sqrt(self.q_eigs)
        c_values = self.c_field.batch(points)
        out = np.full(c_values.shape, np.nan)
        finite = np.all(np.isfinite(c_values), axis=(1, 2))
        if np.any(finite):
            sym = 0.5 * (c_values[finite] + np.swapaxes(c_values[finite], 1, 2))
            values, vectors = np.linalg.eigh(sym)
            roots = np.sqrt(np.abs(values))
            out[finite] = np.einsum('mik,mk,mjk->mij', vectors, roots, vectors)
        return out

    def dispersion(self, x) -> np.ndarray:
        """C(x) = Sigma(x) Sigma(x)^T, or the configured C-field, symmetrized."""
        x = np.asarray(x, dtype=float)
        if self.c_field is not None:
            matrix = np.asarray(self.c_field(self.diffusion_state(x)), dtype=float)
        else:
            sigma = self.sigma(x)
            matrix = sigma @ sigma.T
        return 0.5 * (matrix + matrix.T)

    def sigma_form_available(self, x) -> bool:
        """True when Sigma is a smooth field near x."""
        if self.sigma_field is not None:
            return True
        return self.toolkit.rank(self.dispersion(x)) == self.dim

    def audit_sigma(self, x) -> Dict[str, float]:
        """Symmetry and PSD defects of Sigma(x); C = Sigma^2 defect for C-fields."""
        sigma = self.sigma(x)
        scale = 1.0 + float(np.max(np.abs(sigma)))
        sym = 0.5 * (sigma + sigma.T)
        audit = {
            'symmetry_defect': float(np.max(np.abs(sigma - sigma.T))) / scale,
            'min_eigenvalue': float(np.min(np.linalg.eigvalsh(sym))) / scale,
        }
        if self.c_field is not None:
            c_matrix = self.dispersion(x)
            audit['square_defect'] = float(np.max(np.abs(sigma @ sigma - c_matrix))) / (
                1.0 + float(np.max(np.abs(c_matrix))))
        return audit


def _vector(function, batch, dim, name):
    return CallableField(function, dim, (dim,), batch_function=batch, name=name)


def _matrix(function, batch, dim, name):
    return CallableField(function, dim, (dim, dim), batch_function=batch, name=name)


def cir_model(a: float, b: float = 0.0, sigma0: float = 1.0) -> ModelSpec:
    """Square-root diffusion dX = (a - bX) dt + sigma0 sqrt(X) dW on R."""
    a, b, sigma0 = float(a), float(b), float(sigma0)
    drift = _vector(lambda x: np.array([a - b * x[0]]),
                    lambda p: (a - b * p[:, 0])[:, None], 1, 'cir_drift')

    def sigma(x):
        if x[0] < 0:
            raise ValueError("square root of a negative state")
        return np.array([[sigma0 * np.sqrt(x[0])]])

    def sigma_batch(points):
        values = np.where(points[:, 0] < 0, np.nan, sigma0 * np.sqrt(np.abs(points[:, 0])))
        return values[:, None, None]

    field = _matrix(sigma, sigma_batch, 1, 'cir_sigma')
    return ModelSpec(1, drift, sigma_field=field, name='cir', builtin='cir',
                     params={'a': a, 'b': b, 'sigma0': sigma0}, positive_part=True)


def ou_model(theta: float, mu: float = 0.0, sigma0: float = 1.0, dim: int = 1) -> ModelSpec:
    """dX = theta (mu - X) dt + sigma0 dW."""
    theta, mu, sigma0 = float(theta), float(mu), float(sigma0)
    drift = _vector(lambda x: theta * (mu - x), lambda p: theta * (mu - p), dim, 'ou_drift')
    identity = sigma0 * np.eye(dim)
    field = _matrix(lambda x: identity,
                    lambda p: np.broadcast_to(identity, (p.shape[0], dim, dim)), dim, 'ou_sigma')
    return ModelSpec(dim, drift, sigma_field=field, name='ou', builtin='ou',
                     params={'theta': theta, 'mu': mu, 'sigma0': sigma0, 'dim': dim})


def linear_sigma_model(dim: int = 1, scale: float = 1.0, drift=None) -> ModelSpec:
    """Sigma(x) = scale * diag(x) with constant drift (zero by default)."""
    scale = float(scale)
    drift_vector = np.zeros(dim) if drift is None else np.asarray(drift, dtype=float).reshape(dim)
    drift_field = _vector(lambda x: drift_vector,
                          lambda p: np.tile(drift_vector, (p.shape[0], 1)), dim, 'linear_drift')
    field = _matrix(lambda x: scale * np.diag(x),
                    lambda p: scale * np.einsum('mi,ij->mij', p, np.eye(dim)), dim, 'linear_sigma')
    return ModelSpec(dim, drift_field, sigma_field=field, name='linear_sigma', builtin='linear_sigma',
                     params={'dim': dim, 'scale': scale, 'drift': drift_vector.tolist()})


def orthant_diag_model(drift, scales) -> ModelSpec:
    """Constant drift b and Sigma(x) = diag(s_i x_i); row i vanishes on the face x_i = 0."""
    drift_vector = np.asarray(drift, dtype=float).reshape(-1)
    scales = np.asarray(scales, dtype=float).reshape(-1)
    dim = drift_vector.shape[0]
    if scales.shape[0] != dim:
        raise ModelSpecError("orthant_diag needs one scale per coordinate")
    drift_field = _vector(lambda x: drift_vector,
                          lambda p: np.tile(drift_vector, (p.shape[0], 1)), dim, 'orthant_drift')
    field = _matrix(lambda x: np.diag(scales * x),
                    lambda p: np.einsum('mi,ij->mij', p * scales, np.eye(dim)), dim, 'orthant_sigma')
    return ModelSpec(dim, drift_field, sigma_field=field, name='orthant_diag', builtin='orthant_diag',
                     params={'drift': drift_vector.tolist(), 'scales': scales.tolist()})


def rank_one_plane_model(amplitude: float = 0.5) -> ModelSpec:
    """Sigma(x) = diag(s(x), 0) on R^2 with s(x) = 1 + amplitude sin(x1) + x2^2 / 4."""
    amplitude = float(amplitude)

    def s(points):
        return 1.0 + amplitude * np.sin(points[..., 0]) + 0.25 * points[..., 1] ** 2

    drift_field = _vector(lambda x: np.zeros(2), lambda p: np.zeros((p.shape[0], 2)), 2, 'zero_drift')

    def sigma(x):
        return np.array([[s(x), 0.0], [0.0, 0.0]])

    def sigma_batch(points):
        out = np.zeros((points.shape[0], 2, 2))
        out[:, 0, 0] = s(points)
        return out

    field = _matrix(sigma, sigma_batch, 2, 'rank_one_sigma')
    return ModelSpec(2, drift_field, sigma_field=field, name='rank_one_plane', builtin='rank_one_plane',
                     params={'amplitude': amplitude})


BUILTIN_MODELS = {
    'cir': cir_model,
    'ou': ou_model,
    'linear_sigma': linear_sigma_model,
    'orthant_diag': orthant_diag_model,
    'rank_one_plane': rank_one_plane_model,
}


def build_builtin(tag: str, rank_tol: Optional[float] = None, **params) -> ModelSpec:
    """Instantiate a catalogue model by tag, optionally with its own rank tolerance."""
    if tag not in BUILTIN_MODELS:
        raise ModelSpecError(f"unknown builtin model '{tag}' (known: {', '.join(sorted(BUILTIN_MODELS))})")
    try:
        model = BUILTIN_MODELS[tag](**params)
    except TypeError as exc:
        raise ModelSpecError(f"bad parameters for builtin '{tag}': {exc}") from exc
    if rank_tol is not None:
        model.toolkit = OperatorToolkit(rank_tol=rank_tol)
    return model
