"""
Dense symmetric positive definite linear algebra.

Cholesky factorization with a jitter fallback, triangular solves, and the
O(n^2) bordered extensions of a factor and of its inverse used when one
point is appended to a covariance matrix.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError, cholesky as _lapack_cholesky, solve_triangular

from .errors import DegenerateDiagonal, DimensionMismatch, NotPositiveDefinite

#: Relative jitter levels tried in order, scaled by the mean of the diagonal.
JITTER_LEVELS = (1e-10, 1e-8, 1e-6)

#: Factor applied to sqrt(new_diagonal) when the bordered pivot goes negative.
CLAMP_RELATIVE = 1e-6


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower triangular factor ``L`` with ``L @ L.T`` equal to a source matrix.

    Attributes
    ----------
    lower : ndarray of shape (n, n)
        The lower triangular factor.
    inverse : ndarray of shape (n, n) or None
        ``L^{-1}`` when it has been computed.
    jitter : float
        Absolute value added to the diagonal before factorization succeeded.
    clamped : bool
        True when the last pivot was clamped by :func:`extend_cholesky`.
    """

    lower: np.ndarray
    inverse: Optional[np.ndarray] = None
    jitter: float = 0.0
    clamped: bool = False

    def __post_init__(self):
        object.__setattr__(self, "lower", _frozen(self.lower))
        if self.inverse is not None:
            object.__setattr__(self, "inverse", _frozen(self.inverse))

    @property
    def n(self) -> int:
        return self.lower.shape[0]

    def log_det(self) -> float:
        """Log-determinant of the factored matrix."""
        return 2.0 * float(np.sum(np.log(np.diag(self.lower))))

    def with_inverse(self) -> "CholeskyFactor":
        """Return a copy that also carries ``L^{-1}``."""
        if self.inverse is not None:
            return self
        inv = solve_triangular(self.lower, np.eye(self.n), lower=True)
        return CholeskyFactor(self.lower, inv, self.jitter, self.clamped)

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Solve ``(L L^T) x = b``."""
        return solve_lower(self, solve_lower(self, b), trans=True)


def cholesky(m: np.ndarray, jitter_levels=JITTER_LEVELS) -> CholeskyFactor:
    """Factor a symmetric matrix, adding diagonal jitter if needed.

    The plain factorization is tried first. On failure ``delta * mean(diag)``
    is added to the diagonal for each ``delta`` in `jitter_levels`.

    Raises
    ------
    NotPositiveDefinite
        If every jitter level fails.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    scale = float(np.mean(np.diag(m))) if m.size else 0.0
    if not np.isfinite(scale):
        raise NotPositiveDefinite("matrix has non-finite diagonal")
    scale = abs(scale) if scale != 0.0 else 1.0
    for delta in (0.0,) + tuple(jitter_levels):
        jitter = delta * scale
        a = m + jitter * np.eye(m.shape[0]) if jitter else m
        try:
            lower = _lapack_cholesky(a, lower=True, check_finite=False)
        except LinAlgError:
            continue
        if np.all(np.isfinite(lower)):
            return CholeskyFactor(lower, jitter=jitter)
    raise NotPositiveDefinite(
        f"factorization failed with jitter up to {jitter_levels[-1]:g} * mean(diag)"
    )


def solve_lower(f: CholeskyFactor, b, trans: bool = False) -> np.ndarray:
    """Solve ``L x = b`` (or ``L^T x = b`` with ``trans=True``).

    `b` may be a vector or a matrix of right-hand sides.
    """
    b = np.asarray(b, dtype=float)
    if b.shape[0] != f.n:
        raise DimensionMismatch(f"factor has dimension {f.n}, right-hand side has {b.shape[0]} rows")
    return solve_triangular(f.lower, b, lower=True, trans="T" if trans else "N", check_finite=False)


def border_row(f: CholeskyFactor, new_column, new_diagonal: float):
    """Last row of the factor of ``[[K, c], [c^T, k]]`` without copying ``L``.

    Returns ``(row, pivot, clamped)`` where ``row = L^{-1} c`` and ``pivot`` is
    ``sqrt(k - row.row)``. A non-positive value under the root is replaced
    by ``CLAMP_RELATIVE * sqrt(k)`` and ``clamped`` is True.
    """
    c = np.asarray(new_column, dtype=float).ravel()
    if c.shape[0] != f.n:
        raise DimensionMismatch(f"new column has length {c.shape[0]}, expected {f.n}")
    row = f.inverse @ c if f.inverse is not None else solve_lower(f, c)
    pivot_sq = float(new_diagonal) - float(row @ row)
    clamped = not pivot_sq > 0.0
    if clamped:
        pivot = CLAMP_RELATIVE * np.sqrt(max(float(new_diagonal), 0.0))
    else:
        pivot = float(np.sqrt(pivot_sq))
    return row, pivot, clamped


def inverse_border_row(inverse: np.ndarray, row: np.ndarray, pivot: float) -> np.ndarray:
    """Last row of the inverse of a bordered factor, ``[-(row^T L^{-1}) / p, 1 / p]``."""
    if not (pivot > np.finfo(float).tiny and np.isfinite(1.0 / pivot)):
        raise DegenerateDiagonal(f"last pivot {pivot!r} cannot be inverted")
    return np.append(-(row @ inverse) / pivot, 1.0 / pivot)


def extend_cholesky(f: CholeskyFactor, new_column, new_diagonal: float) -> CholeskyFactor:
    """Factor of the bordered matrix ``[[K, c], [c^T, k]]`` in O(n^2).

    The leading n x n block of the result is a copy of ``f.lower``; only the
    new last row is computed (see :func:`border_row`). The ``clamped`` flag
    of the result reports a clamped pivot.
    """
    row, pivot, clamped = border_row(f, new_column, new_diagonal)
    n = f.n
    lower = np.zeros((n + 1, n + 1))
    lower[:n, :n] = f.lower
    lower[n, :n] = row
    lower[n, n] = pivot
    return CholeskyFactor(lower, jitter=f.jitter, clamped=clamped)


def extend_inverse_cholesky(f: CholeskyFactor, extended: CholeskyFactor) -> np.ndarray:
    """Inverse of an extended factor from the inverse of the original, O(n^2).

    With ``L' = [[L, 0], [l^T, p]]`` the inverse is
    ``[[L^{-1}, 0], [-(l^T L^{-1}) / p, 1 / p]]``.
    """
    if f.inverse is None:
        raise ValueError("original factor does not carry its inverse")
    n = f.n
    if extended.n != n + 1:
        raise DimensionMismatch(f"extended factor has dimension {extended.n}, expected {n + 1}")
    inv = np.zeros((n + 1, n + 1))
    inv[:n, :n] = f.inverse
    inv[n] = inverse_border_row(f.inverse, extended.lower[n, :n], float(extended.lower[n, n]))
    return inv
