"""Covariance functions and covariance matrix assembly."""

import abc
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DimensionMismatch


def as_points(x, dim=None) -> np.ndarray:
    """Coerce `x` to a 2-D float array of points, one per row."""
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(-1, 1) if dim in (None, 1) else a.reshape(1, -1)
    if a.ndim != 2:
        raise DimensionMismatch(f"expected a point set, got array of shape {a.shape}")
    if dim is not None and a.shape[1] != dim:
        raise DimensionMismatch(f"points have dimension {a.shape[1]}, expected {dim}")
    return a


class Kernel(abc.ABC):
    """Stationary covariance function ``k(x, x')``."""

    dim: int

    @abc.abstractmethod
    def cov_matrix(self, A, B=None) -> np.ndarray:
        """Matrix of covariances between the rows of `A` and `B`."""

    @abc.abstractmethod
    def diag(self, A) -> np.ndarray:
        """Self-covariances ``k(a, a)`` for each row of `A`."""

    def eval(self, x, x_prime) -> float:
        x = np.asarray(x, dtype=float).reshape(1, -1)
        x_prime = np.asarray(x_prime, dtype=float).reshape(1, -1)
        return float(self.cov_matrix(x, x_prime)[0, 0])

    def __call__(self, A, B=None):
        return self.cov_matrix(A, B)


@dataclass(frozen=True)
class SeKernel(Kernel):
    """Anisotropic squared exponential kernel.

    ``k(x, x') = output_scale**2 * exp(-sum_k length_weights[k]**2 * (x_k - x'_k)**2)``

    Parameters
    ----------
    output_scale : float
        Square root of the prior variance.
    length_weights : array_like of shape (d,)
        Inverse length scales, one per input dimension.
    """

    output_scale: float
    length_weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.length_weights, dtype=float).ravel()
        w.setflags(write=False)
        object.__setattr__(self, "length_weights", w)
        object.__setattr__(self, "output_scale", float(self.output_scale))
        if not self.output_scale > 0:
            raise ValueError(f"output_scale must be positive, got {self.output_scale}")
        if w.size < 1 or np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("length_weights must be a non-empty vector of finite non-negative values")

    @property
    def dim(self) -> int:
        return self.length_weights.size

    @property
    def variance(self) -> float:
        return self.output_scale ** 2

    def cov_matrix(self, A, B=None) -> np.ndarray:
        A = as_points(A, self.dim) * self.length_weights
        B = A if B is None else as_points(B, self.dim) * self.length_weights
        return self.variance * np.exp(-cdist(A, B, "sqeuclidean"))

    def diag(self, A) -> np.ndarray:
        return np.full(as_points(A, self.dim).shape[0], self.variance)

    # log-space parameterization: [log theta0^2, log theta_1^2, ..., log theta_d^2]

    def log_params(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.concatenate([[np.log(self.variance)], 2.0 * np.log(self.length_weights)])

    @classmethod
    def from_log_params(cls, p) -> "SeKernel":
        p = np.asarray(p, dtype=float)
        return cls(np.exp(0.5 * p[0]), np.exp(0.5 * p[1:]))

    def gradients(self, X, K=None):
        """Derivatives of ``cov_matrix(X)`` with respect to each log parameter.

        Yields one (n, n) matrix at a time to keep memory at O(n^2).
        """
        X = as_points(X, self.dim)
        if K is None:
            K = self.cov_matrix(X)
        yield K
        for k, w in enumerate(self.length_weights):
            diff = X[:, k, None] - X[None, :, k]
            yield -(w * w) * (diff * diff) * K

    def log_param_grad(self, X, K, W) -> np.ndarray:
        """``0.5 * sum(W * dK)`` for every log parameter, without forming ``dK``.

        `W` must be symmetric. Uses ``sum_ij M_ij (x_i - x_j)^2 = 2 (x^2)^T M 1 - 2 x^T M x``
        with ``M = W * K``, so the cost is one elementwise product and one
        matrix product.
        """
        X = as_points(X, self.dim)
        M = W * K
        row = M.sum(axis=1)
        MX = M @ X
        quad = 2.0 * (X * X).T @ row - 2.0 * np.einsum("ik,ik->k", X, MX)
        out = np.empty(self.dim + 1)
        out[0] = 0.5 * float(row.sum())
        out[1:] = -0.5 * self.length_weights ** 2 * quad
        return out


@dataclass(frozen=True)
class NoiseSpec:
    """White noise variance added on the diagonal of a training covariance."""

    variance: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "variance", float(self.variance))
        if not self.variance >= 0:
            raise ValueError(f"noise variance must be non-negative, got {self.variance}")


def add_noise_diagonal(m, noise) -> np.ndarray:
    """Return ``m + noise.variance * I``. `noise` may be a NoiseSpec or a float."""
    m = np.array(m, dtype=float, copy=True)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    var = noise.variance if isinstance(noise, NoiseSpec) else float(noise)
    m[np.diag_indices_from(m)] += var
    return m
