"""
Single-fidelity Gaussian process regression.

Zero-mean GP with a squared exponential kernel and white noise. Parameters
are fitted by penalized maximum likelihood with a multi-start L-BFGS-B
search in log space; inputs and responses are standardized internally.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.linalg import lapack
from scipy.optimize import minimize
from scipy.stats import qmc

from .errors import AllStartsFailed, DimensionMismatch, NotPositiveDefinite
from .kernels import NoiseSpec, SeKernel, add_noise_diagonal, as_points
from .numerics import CholeskyFactor, cholesky, solve_lower

LOG_2PI = np.log(2.0 * np.pi)

#: Weight of the quadratic penalty pulling log parameters toward their start.
PENALTY = 1e-3
#: Half-width of the box around the initial log parameters.
LOG_BOUND = 10.0
#: Lower limit on the noise variance relative to var(y).
NUGGET_FLOOR = 1e-8

# objective value returned when the covariance cannot be factored
_FAILED = 1e25


@dataclass(frozen=True)
class Dataset:
    """Training or test sample: inputs ``X`` (n, d) and responses ``y`` (n,)."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        y = np.array(self.y, dtype=float).ravel()
        X = np.array(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1) if X.size == y.size else X.reshape(1, -1)
        if X.ndim != 2 or X.shape[0] != y.size:
            raise DimensionMismatch(f"X has shape {X.shape} but y has {y.size} values")
        if y.size < 1:
            raise ValueError("dataset is empty")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("dataset contains non-finite values")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return Dataset(self.X[idx], self.y[idx])


@dataclass(frozen=True)
class AffineMap:
    """Per-dimension affine standardization of inputs and responses.

    ``x_std = (x - x_offset) / x_scale`` and ``y_std = (y - y_offset) / y_scale``.
    """

    x_offset: np.ndarray
    x_scale: np.ndarray
    y_offset: float = 0.0
    y_scale: float = 1.0

    def __post_init__(self):
        for name in ("x_offset", "x_scale"):
            a = np.array(getattr(self, name), dtype=float).ravel()
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        object.__setattr__(self, "y_offset", float(self.y_offset))
        object.__setattr__(self, "y_scale", float(self.y_scale))

    @classmethod
    def identity(cls, dim: int) -> "AffineMap":
        return cls(np.zeros(dim), np.ones(dim), 0.0, 1.0)

    @classmethod
    def from_data(cls, X, y) -> "AffineMap":
        """Map the bounding box of `X` to the unit cube and `y` to zero mean, unit variance."""
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        lo, hi = X.min(axis=0), X.max(axis=0)
        span = np.where(hi > lo, hi - lo, 1.0)
        sd = float(np.std(y))
        return cls(lo, span, float(np.mean(y)), sd if sd > 0 else 1.0)

    def x(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.x_offset) / self.x_scale

    def y(self, y) -> np.ndarray:
        return (np.asarray(y, dtype=float) - self.y_offset) / self.y_scale

    def y_back(self, y_std) -> np.ndarray:
        return np.asarray(y_std) * self.y_scale + self.y_offset

    def var_back(self, var_std) -> np.ndarray:
        return np.asarray(var_std) * self.y_scale ** 2

    def with_y_offset(self, offset: float) -> "AffineMap":
        return AffineMap(self.x_offset, self.x_scale, offset, self.y_scale)


@dataclass(frozen=True)
class FitConfig:
    """Hyperparameter search settings.

    Attributes
    ----------
    restarts : int
        Number of optimizer starts; the first is the heuristic initial point.
    max_iter : int
        Iteration cap for each L-BFGS-B run.
    seed : int
        Seed for the start-point perturbations.
    nugget_floor : float or None
        Lower limit on the noise variance in standardized units
        (defaults to ``NUGGET_FLOOR``).
    """

    restarts: int = 5
    max_iter: int = 200
    seed: int = 0
    nugget_floor: Optional[float] = None

    @property
    def floor(self) -> float:
        return NUGGET_FLOOR if self.nugget_floor is None else float(self.nugget_floor)


@dataclass(frozen=True)
class FitReport:
    """Outcome of a multi-start likelihood search."""

    log_likelihood: float
    penalized: float
    initial_penalized: float
    restarts_used: int
    restarts_failed: int
    converged: Tuple[bool, ...]
    start_values: Tuple[float, ...] = ()
    final_values: Tuple[float, ...] = ()

    def as_dict(self) -> dict:
        return {
            "log_likelihood": self.log_likelihood,
            "penalized": self.penalized,
            "initial_penalized": self.initial_penalized,
            "restarts_used": self.restarts_used,
            "restarts_failed": self.restarts_failed,
            "converged": list(self.converged),
            "start_values": list(self.start_values),
            "final_values": list(self.final_values),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FitReport":
        return cls(
            d["log_likelihood"], d["penalized"], d["initial_penalized"],
            d["restarts_used"], d["restarts_failed"], tuple(d["converged"]),
            tuple(d.get("start_values", ())), tuple(d.get("final_values", ())),
        )


def training_covariance(X, kernel: SeKernel, noise: NoiseSpec) -> np.ndarray:
    return add_noise_diagonal(kernel.cov_matrix(X), noise)


def log_likelihood(data: Dataset, kernel: SeKernel, noise: NoiseSpec) -> float:
    """Gaussian log-likelihood of ``data.y`` under the zero-mean GP."""
    K = training_covariance(data.X, kernel, noise)
    f = cholesky(K)
    z = solve_lower(f, data.y)
    return -0.5 * (data.n * LOG_2PI + f.log_det() + float(z @ z))


def log_likelihood_and_grad(X, y, log_params, return_alpha: bool = False):
    """Log-likelihood and its gradient in log-parameter space.

    `log_params` is ``[log theta0^2, log theta_1^2, ..., log theta_d^2, log sigma^2]``.
    With `return_alpha` the weight vector ``K^{-1} y`` is returned as a third
    element. Raises NotPositiveDefinite when the covariance cannot be factored.
    """
    log_params = np.asarray(log_params, dtype=float)
    kernel = SeKernel.from_log_params(log_params[:-1])
    noise_var = float(np.exp(log_params[-1]))
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = y.size
    Kf = kernel.cov_matrix(X)
    f = cholesky(add_noise_diagonal(Kf, noise_var))
    alpha = f.solve(y)
    value = -0.5 * (n * LOG_2PI + f.log_det() + float(y @ alpha))
    # W = alpha alpha^T - K^{-1}; dL/dp = 0.5 * sum(W * dK/dp)
    K_inv, info = lapack.dpotri(f.lower, lower=1)
    if info != 0:
        raise NotPositiveDefinite("inverse from Cholesky factor failed")
    K_inv = np.tril(K_inv) + np.tril(K_inv, -1).T
    W = np.outer(alpha, alpha)
    W -= K_inv
    grad = np.empty(log_params.size)
    grad[:-1] = kernel.log_param_grad(X, Kf, W)
    grad[-1] = 0.5 * noise_var * float(np.trace(W))
    if return_alpha:
        return value, grad, alpha
    return value, grad


def multistart_maximize(
    fun: Callable[[np.ndarray], Tuple[float, np.ndarray]],
    x0: np.ndarray,
    bounds,
    config: FitConfig,
    penalty_center: Optional[np.ndarray] = None,
    penalty_mask: Optional[np.ndarray] = None,
):
    """Maximize ``fun(p) - PENALTY * ||p - center||^2`` from several starts.

    `fun` returns ``(value, gradient)`` and may raise NotPositiveDefinite.
    Start 0 is `x0`; the others are Latin hypercube perturbations of `x0`
    within +-2 log units, clipped to `bounds`. Returns the best point and a
    FitReport. Ties go to the lowest restart index.
    """
    x0 = np.asarray(x0, dtype=float)
    center = x0 if penalty_center is None else np.asarray(penalty_center, dtype=float)
    mask = np.ones_like(x0) if penalty_mask is None else np.asarray(penalty_mask, dtype=float)
    lo = np.array([b[0] if b[0] is not None else -np.inf for b in bounds])
    hi = np.array([b[1] if b[1] is not None else np.inf for b in bounds])

    def penalized(p):
        value, grad = fun(p)
        d = (p - center) * mask
        return value - PENALTY * float(d @ d), grad - 2.0 * PENALTY * d, value

    def neg(p):
        try:
            v, g, _ = penalized(p)
        except NotPositiveDefinite:
            return _FAILED, np.zeros_like(p)
        if not np.isfinite(v):
            return _FAILED, np.zeros_like(p)
        return -v, -g

    starts = [np.clip(x0, lo, hi)]
    if config.restarts > 1:
        sampler = qmc.LatinHypercube(d=x0.size, seed=config.seed)
        jitter = 4.0 * sampler.random(config.restarts - 1) - 2.0
        starts.extend(np.clip(x0 + j, lo, hi) for j in jitter)

    best = None
    start_vals, final_vals, converged = [], [], []
    failed = 0
    for s in starts:
        try:
            v0, _, _ = penalized(s)
        except NotPositiveDefinite:
            v0 = -np.inf
        res = minimize(neg, s, jac=True, method="L-BFGS-B", bounds=bounds,
                       options={"maxiter": config.max_iter})
        p = np.asarray(res.x, dtype=float)
        try:
            v, _, raw = penalized(p)
        except NotPositiveDefinite:
            v, raw = -np.inf, -np.inf
        # never return a point worse than the start it came from
        if v0 > v:
            p, v = s, v0
            raw = penalized(s)[2]
        start_vals.append(float(v0))
        final_vals.append(float(v))
        converged.append(bool(res.success))
        if not np.isfinite(v):
            failed += 1
            continue
        if best is None or v > best[1]:
            best = (p, v, raw)
    if best is None:
        raise AllStartsFailed(f"all {len(starts)} optimizer starts failed to factor the covariance")
    report = FitReport(
        log_likelihood=float(best[2]),
        penalized=float(best[1]),
        initial_penalized=float(start_vals[0]),
        restarts_used=len(starts),
        restarts_failed=failed,
        converged=tuple(converged),
        start_values=tuple(start_vals),
        final_values=tuple(final_vals),
    )
    return best[0], report


def initial_log_params(X, y) -> np.ndarray:
    """Heuristic start: theta_k = 1/range_k, theta0^2 = var(y), sigma^2 = 0.01 var(y)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    span = X.max(axis=0) - X.min(axis=0)
    span = np.where(span > 0, span, 1.0)
    var = float(np.var(y)) if y.size > 1 else 0.0
    var = var if var > 0 else 1.0
    return np.concatenate([[np.log(var)], -2.0 * np.log(span), [np.log(1e-2 * var)]])


def log_bounds(x0, floor_log=None):
    """Box of +-LOG_BOUND around `x0`; the last (noise) entry bottoms out at `floor_log`."""
    bounds = [(float(v - LOG_BOUND), float(v + LOG_BOUND)) for v in x0]
    if floor_log is not None:
        bounds[-1] = (float(floor_log), max(bounds[-1][1], float(floor_log)))
    return bounds


def fit_kernel(X, y, config: FitConfig = FitConfig()):
    """Fit kernel and noise to already standardized data.

    Returns ``(kernel, noise, report)``.
    """
    X = as_points(X)
    y = np.asarray(y, dtype=float).ravel()
    x0 = initial_log_params(X, y)
    var = float(np.var(y)) if y.size > 1 and np.var(y) > 0 else 1.0
    bounds = log_bounds(x0, np.log(config.floor * var))
    p, report = multistart_maximize(lambda q: log_likelihood_and_grad(X, y, q), x0, bounds, config)
    return SeKernel.from_log_params(p[:-1]), NoiseSpec(float(np.exp(p[-1]))), report


@dataclass(frozen=True)
class GpModel:
    """Fitted single-fidelity GP.

    The kernel and noise act in the standardized space given by `transform`;
    `training` holds the original data.
    """

    kernel: SeKernel
    noise: NoiseSpec
    training: Dataset
    transform: AffineMap
    factor: CholeskyFactor
    weights: np.ndarray
    fit_report: Optional[FitReport] = None

    @classmethod
    def from_params(cls, kernel: SeKernel, noise: NoiseSpec, training: Dataset,
                    transform: Optional[AffineMap] = None,
                    fit_report: Optional[FitReport] = None) -> "GpModel":
        if transform is None:
            transform = AffineMap.identity(training.dim)
        if kernel.dim != training.dim:
            raise DimensionMismatch(f"kernel dimension {kernel.dim} != data dimension {training.dim}")
        Xs = transform.x(training.X)
        ys = transform.y(training.y)
        factor = cholesky(training_covariance(Xs, kernel, noise))
        weights = factor.solve(ys)
        weights.setflags(write=False)
        return cls(kernel, noise, training, transform, factor, weights, fit_report)

    @property
    def dim(self) -> int:
        return self.training.dim

    def predict(self, X_new, full_cov: bool = True):
        return predict(self, X_new, full_cov)


def fit(data: Dataset, config: FitConfig = FitConfig()) -> GpModel:
    """Standardize `data`, fit kernel and noise by penalized MLE, cache the factor."""
    transform = AffineMap.from_data(data.X, data.y)
    kernel, noise, report = fit_kernel(transform.x(data.X), transform.y(data.y), config)
    return GpModel.from_params(kernel, noise, data, transform, report)


def predict(model: GpModel, X_new, full_cov: bool = True):
    """Posterior mean and covariance of noisy responses at `X_new`.

    Returns ``(mean, cov)`` where `cov` is the full (m, m) matrix, or the
    variance vector when ``full_cov`` is False. Variances are clamped at 0.
    """
    Xs = model.transform.x(as_points(X_new, model.dim))
    Xt = model.transform.x(model.training.X)
    K_star = model.kernel.cov_matrix(Xs, Xt)
    mean = K_star @ model.weights
    A = solve_lower(model.factor, K_star.T)
    if full_cov:
        cov = add_noise_diagonal(model.kernel.cov_matrix(Xs), model.noise) - A.T @ A
        cov = 0.5 * (cov + cov.T)
        idx = np.diag_indices_from(cov)
        cov[idx] = np.maximum(cov[idx], 0.0)
        return model.transform.y_back(mean), model.transform.var_back(cov)
    var = model.kernel.diag(Xs) + model.noise.variance - np.sum(A * A, axis=0)
    return model.transform.y_back(mean), model.transform.var_back(np.maximum(var, 0.0))
