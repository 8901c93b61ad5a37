"""Small dense linear algebra helpers.

Matrices are plain 2-D ``float64`` numpy arrays (row-major).  Sizes here never
exceed a few hundred rows, so everything is dense.
"""
import numpy as np
from scipy.linalg import cho_factor, cho_solve

# Shared tolerances for the oracle tests.
EQUIV_TOL = 1e-8
SYMMETRY_TOL = 1e-10


class InsufficientDampingError(np.linalg.LinAlgError):
    """Raised when ``m + damping * I`` is not numerically positive definite."""


def _as_matrix(m, name="matrix"):
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def matmul(a, b):
    a = _as_matrix(a, "a")
    b = _as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} x {b.shape}")
    return a @ b


def outer(u, v):
    return np.outer(np.asarray(u, dtype=float), np.asarray(v, dtype=float))


def kron(a, b):
    """Kronecker product.  Only used as a brute-force oracle in tests."""
    return np.kron(np.asarray(a, dtype=float), np.asarray(b, dtype=float))


def invert_spd(m, damping=0.0):
    """Return ``(m + damping * I)^-1`` through a Cholesky factorization.

    Raises :class:`InsufficientDampingError` if the damped matrix does not
    admit a Cholesky factor.  The result is symmetrized.
    """
    m = _as_matrix(m)
    n, k = m.shape
    if n != k:
        raise ValueError(f"matrix must be square, got {m.shape}")
    if damping < 0:
        raise ValueError("damping must be non-negative")
    scale = max(1.0, float(np.max(np.abs(m))) if m.size else 1.0)
    if np.max(np.abs(m - m.T), initial=0.0) > 1e-8 * scale:
        raise ValueError("matrix must be symmetric")
    damped = m + damping * np.eye(n)
    try:
        factor = cho_factor(damped, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise InsufficientDampingError(
            f"matrix is not positive definite with damping={damping}"
        ) from exc
    inv = cho_solve(factor, np.eye(n), check_finite=False)
    return 0.5 * (inv + inv.T)


def is_positive_definite(m):
    try:
        np.linalg.cholesky(np.asarray(m, dtype=float))
    except np.linalg.LinAlgError:
        return False
    return True
