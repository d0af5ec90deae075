"""
InvarLab - Random Streams
Counter-based normal streams keyed by (seed, purpose, path); draws run step-major, mode-minor
"""

import numpy as np

STREAM_PATHS = 1
STREAM_DOUBLE_INTEGRAL = 2

_U64 = (1 << 64) - 1
_PATH_BITS = 48


def path_generator(seed: int, path: int, stream: int = STREAM_PATHS) -> np.random.Generator:
    """Independent Philox generator for one path; never shared between paths."""
    if path < 0 or path >= (1 << _PATH_BITS):
        raise ValueError(f"path index {path} out of range")
    key = np.array([int(seed) & _U64, (int(stream) << _PATH_BITS) | int(path)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def path_normals(seed: int, path: int, n_steps: int, n_modes: int,
                 stream: int = STREAM_PATHS) -> np.ndarray:
    """xi[k, j] for step k and mode j of one path."""
    return path_generator(seed, path, stream).standard_normal((n_steps, n_modes))


def chunk_normals(seed: int, paths, n_steps: int, n_modes: int,
                  stream: int = STREAM_PATHS) -> np.ndarray:
    """Normals for several paths, shape (len(paths), n_steps, n_modes)."""
    return np.stack([path_normals(seed, path, n_steps, n_modes, stream) for path in paths])


def wiener_increments(seed: int, path: int, n_steps: int, q_eigs, h: float) -> np.ndarray:
    """Delta W_k = sum_j sqrt(lambda_j h) xi_kj e_j for one path, shape (n_steps, n)."""
    q_eigs = np.asarray(q_eigs, dtype=float).reshape(-1)
    return path_normals(seed, path, n_steps, q_eigs.shape[0]) * np.sqrt(q_eigs * h)
