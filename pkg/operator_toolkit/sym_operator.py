"""
InvarLab - Symmetric Operator Toolkit
Dense self-adjoint operators on a truncated Hilbert space: ordered spectra,
Moore-Penrose pseudoinverse, range projections, |A|^(1/2) and trace norms
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
from scipy import linalg

logger = logging.getLogger(__name__)

DEFAULT_RANK_TOL = 1e-10
DEFAULT_SYM_TOL = 1e-12

# Relative window around rank_tol inside which a rank decision is fragile
AMBIGUITY_FACTOR = 100.0


class OperatorError(Exception):
    """Base class for operator toolkit failures."""


class NonSymmetricOperatorError(OperatorError):
    """Raised when a matrix is too far from symmetric to be symmetrized."""

    def __init__(self, defect, allowed):
        self.defect = float(defect)
        self.allowed = float(allowed)
        super().__init__(
            f"matrix is not symmetric: defect {self.defect:.3e} exceeds {self.allowed:.3e}"
        )


@dataclass(frozen=True, eq=False)
class SymOperator:
    """Truncated self-adjoint operator in the fixed basis {e_j}."""

    entries: np.ndarray

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float, copy=True)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise OperatorError(f"expected a square matrix, got shape {entries.shape}")
        if not np.all(np.isfinite(entries)):
            raise OperatorError("operator entries must be finite")
        entries.setflags(write=False)
        object.__setattr__(self, 'entries', entries)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def from_matrix(cls, matrix, sym_tol: float = DEFAULT_SYM_TOL) -> 'SymOperator':
        """Symmetrize a nearly symmetric matrix, rejecting larger defects."""
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        if matrix.shape[0] != matrix.shape[1]:
            raise OperatorError(f"expected a square matrix, got shape {matrix.shape}")
        scale = float(np.max(np.abs(matrix))) if matrix.size else 0.0
        defect = float(np.max(np.abs(matrix - matrix.T))) if matrix.size else 0.0
        allowed = sym_tol * (1.0 + scale)
        if defect > allowed:
            raise NonSymmetricOperatorError(defect, allowed)
        return cls(0.5 * (matrix + matrix.T))

    @classmethod
    def zero(cls, dim: int) -> 'SymOperator':
        return cls(np.zeros((dim, dim)))

    @classmethod
    def identity(cls, dim: int) -> 'SymOperator':
        return cls(np.eye(dim))

    @classmethod
    def diag(cls, values) -> 'SymOperator':
        return cls(np.diag(np.asarray(values, dtype=float)))

    def symmetry_defect(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.T)))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.entries))) if self.entries.size else 0.0

    def __matmul__(self, other):
        if isinstance(other, SymOperator):
            return self.entries @ other.entries
        return self.entries @ np.asarray(other, dtype=float)


@dataclass(frozen=True, eq=False)
class SpectralDecomp:
    """Eigenpairs ordered by nonincreasing |mu|, positives first on ties."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def rank(self, rank_tol: float = DEFAULT_RANK_TOL) -> int:
        return int(np.count_nonzero(_nonzero_mask(self.eigenvalues, rank_tol)))

    def reconstruct(self) -> np.ndarray:
        q = self.eigenvectors
        return (q * self.eigenvalues) @ q.T


def _nonzero_mask(eigenvalues, rank_tol):
    """Mask of eigenvalues that count as nonzero relative to the largest one."""
    if eigenvalues.size == 0:
        return np.zeros(0, dtype=bool)
    top = float(np.max(np.abs(eigenvalues)))
    if top == 0.0:
        return np.zeros(eigenvalues.shape, dtype=bool)
    return np.abs(eigenvalues) > rank_tol * top


def _fix_signs(vectors, tiny=1e-10):
    """Make the first non-negligible coordinate of every column positive."""
    fixed = vectors.copy()
    for k in range(fixed.shape[1]):
        column = fixed[:, k]
        significant = np.flatnonzero(np.abs(column) > tiny)
        if significant.size and column[significant[0]] < 0:
            fixed[:, k] = -column
    return fixed


class OperatorToolkit:
    """Spectral calculus for SymOperator values with a shared rank tolerance."""

    def __init__(self, rank_tol: float = DEFAULT_RANK_TOL, sym_tol: float = DEFAULT_SYM_TOL):
        self.rank_tol = float(rank_tol)
        self.sym_tol = float(sym_tol)

    def as_operator(self, matrix) -> SymOperator:
        """Accept a SymOperator or any square array-like; both must pass the symmetry check."""
        if isinstance(matrix, SymOperator):
            allowed = self.sym_tol * (1.0 + matrix.max_abs())
            if matrix.dim and matrix.symmetry_defect() > allowed:
                raise NonSymmetricOperatorError(matrix.symmetry_defect(), allowed)
            return matrix
        return SymOperator.from_matrix(matrix, self.sym_tol)

    def spectral(self, operator) -> SpectralDecomp:
        """Eigen-decomposition with |mu| nonincreasing and +mu before -mu."""
        operator = self.as_operator(operator)
        if operator.dim == 0:
            return SpectralDecomp(np.zeros(0), np.zeros((0, 0)))

        values, vectors = linalg.eigh(operator.entries)
        order = self._spectral_order(values)
        values = values[order]
        vectors = _fix_signs(vectors[:, order])
        values.setflags(write=False)
        vectors.setflags(write=False)
        return SpectralDecomp(values, vectors)

    def _spectral_order(self, values):
        """Sort by |mu| descending; near-ties are resolved positive first."""
        order = list(np.argsort(-np.abs(values), kind='stable'))
        top = float(np.max(np.abs(values))) if values.size else 0.0
        tie_width = self.rank_tol * top

        # Group chains of near-equal magnitudes and reorder each group by sign
        grouped = []
        start = 0
        while start < len(order):
            stop = start + 1
            while stop < len(order) and (
                abs(values[order[stop - 1]]) - abs(values[order[stop]]) <= tie_width
            ):
                stop += 1
            cluster = order[start:stop]
            positives = [k for k in cluster if values[k] >= 0]
            negatives = [k for k in cluster if values[k] < 0]
            grouped.extend(positives + negatives)
            start = stop
        return np.array(grouped, dtype=int)

    def pinv(self, operator, rank_tol: Optional[float] = None) -> SymOperator:
        """Moore-Penrose pseudoinverse; tiny eigenvalues are treated as zero."""
        operator = self.as_operator(operator)
        tol = self.rank_tol if rank_tol is None else float(rank_tol)
        decomp = self.spectral(operator)
        keep = _nonzero_mask(decomp.eigenvalues, tol)
        if not np.any(keep):
            return SymOperator.zero(operator.dim)
        q = decomp.eigenvectors[:, keep]
        inverse = (q / decomp.eigenvalues[keep]) @ q.T
        return SymOperator(0.5 * (inverse + inverse.T))

    def range_proj(self, operator, rank_tol: Optional[float] = None) -> SymOperator:
        """Orthogonal projection onto ran(A), equal to A pinv(A)."""
        operator = self.as_operator(operator)
        tol = self.rank_tol if rank_tol is None else float(rank_tol)
        decomp = self.spectral(operator)
        keep = _nonzero_mask(decomp.eigenvalues, tol)
        q = decomp.eigenvectors[:, keep]
        projection = q @ q.T
        return SymOperator(0.5 * (projection + projection.T))

    def sqrt_abs(self, operator) -> SymOperator:
        """Positive square root of |A|."""
        operator = self.as_operator(operator)
        decomp = self.spectral(operator)
        q = decomp.eigenvectors
        root = (q * np.sqrt(np.abs(decomp.eigenvalues))) @ q.T
        return SymOperator(0.5 * (root + root.T))

    def norms(self, operator) -> Dict[str, float]:
        """Trace, nuclear, Hilbert-Schmidt and operator norm."""
        operator = self.as_operator(operator)
        if operator.dim == 0:
            return {'trace': 0.0, 'nuclear': 0.0, 'hilbert_schmidt': 0.0, 'operator': 0.0}
        values = self.spectral(operator).eigenvalues
        return {
            'trace': float(np.trace(operator.entries)),
            'nuclear': float(np.sum(np.abs(values))),
            'hilbert_schmidt': float(np.linalg.norm(operator.entries, 'fro')),
            'operator': float(np.max(np.abs(values))),
        }

    def rank(self, operator, rank_tol: Optional[float] = None) -> int:
        tol = self.rank_tol if rank_tol is None else float(rank_tol)
        return self.spectral(operator).rank(tol)

    def rank_ambiguous(self, operator, rank_tol: Optional[float] = None) -> bool:
        """True when some eigenvalue sits close enough to rank_tol to flip the rank."""
        tol = self.rank_tol if rank_tol is None else float(rank_tol)
        values = np.abs(self.spectral(operator).eigenvalues)
        if values.size == 0 or values[0] == 0.0:
            return False
        relative = values / values[0]
        band = (relative > tol / AMBIGUITY_FACTOR) & (relative < tol * AMBIGUITY_FACTOR)
        return bool(np.any(band))

    def penrose_residuals(self, operator, inverse) -> Dict[str, float]:
        """Max-abs residuals of the four Penrose identities."""
        a = self.as_operator(operator).entries
        x = inverse.entries if isinstance(inverse, SymOperator) else np.asarray(inverse, dtype=float)
        ax = a @ x
        xa = x @ a
        return {
            'axa': float(np.max(np.abs(ax @ a - a))) if a.size else 0.0,
            'xax': float(np.max(np.abs(xa @ x - x))) if a.size else 0.0,
            'ax_sym': float(np.max(np.abs(ax.T - ax))) if a.size else 0.0,
            'xa_sym': float(np.max(np.abs(xa.T - xa))) if a.size else 0.0,
        }

    @staticmethod
    def random_orthogonal(rng: np.random.Generator, dim: int) -> np.ndarray:
        q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
        return q * np.sign(np.where(np.diag(r) == 0, 1.0, np.diag(r)))

    @classmethod
    def random_psd(cls, rng: np.random.Generator, dim: int, rank: int,
                   spread: float = 10.0) -> SymOperator:
        """Random PSD matrix of the given rank, nonzero eigenvalues in [1/spread, 1]."""
        values = np.zeros(dim)
        values[:rank] = rng.uniform(1.0 / spread, 1.0, rank)
        q = cls.random_orthogonal(rng, dim)
        matrix = (q * values) @ q.T
        return SymOperator(0.5 * (matrix + matrix.T))

    @staticmethod
    def random_symmetric(rng: np.random.Generator, dim: int) -> SymOperator:
        matrix = rng.standard_normal((dim, dim))
        return SymOperator(0.5 * (matrix + matrix.T))
