"""
Variable-fidelity (co-kriging) Gaussian process regression.

The high-fidelity response is modelled as ``y_h = rho * y_l + y_d`` with
independent zero-mean GPs for ``y_l`` and ``y_d``. Parameters are estimated
in three steps: fit the low-fidelity process alone, predict it at the
high-fidelity inputs, then fit the difference process jointly with ``rho``.
Prediction is exact inference over the stacked sample.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist

from . import gp
from .errors import DimensionMismatch
from .gp import AffineMap, Dataset, FitConfig, FitReport
from .kernels import NoiseSpec, SeKernel, as_points
from .numerics import CholeskyFactor, cholesky, solve_lower


@dataclass(frozen=True)
class VfDataset:
    """Low- and high-fidelity samples sharing one input space."""

    low: Dataset
    high: Dataset

    def __post_init__(self):
        if self.low.dim != self.high.dim:
            raise DimensionMismatch(
                f"low-fidelity dimension {self.low.dim} != high-fidelity dimension {self.high.dim}"
            )

    @property
    def dim(self) -> int:
        return self.low.dim

    @property
    def n(self) -> int:
        return self.low.n + self.high.n

    @property
    def y(self) -> np.ndarray:
        return np.concatenate([self.low.y, self.high.y])


def coincidence(A, B) -> np.ndarray:
    """Pairing of each row of `A` with the first row of `B` equal to it.

    Returns an indicator matrix with at most one 1 per row. A high-fidelity
    value shares the low nugget with its paired low observation only, which
    keeps the joint covariance positive semi-definite when low inputs repeat.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    out = np.zeros((A.shape[0], B.shape[0]))
    if A.shape[0] == 0 or B.shape[0] == 0:
        return out
    equal = cdist(A, B, "chebyshev") == 0.0
    rows = np.flatnonzero(equal.any(axis=1))
    out[rows, equal[rows].argmax(axis=1)] = 1.0
    return out


@dataclass(frozen=True)
class VfParams:
    """Process parameters of the co-kriging model (standardized units)."""

    kernel_low: SeKernel
    noise_low: NoiseSpec
    kernel_diff: SeKernel
    noise_diff: NoiseSpec
    rho: float

    @property
    def high_noise(self) -> float:
        """Noise variance of a high-fidelity observation, ``rho^2 s_l^2 + s_d^2``."""
        return self.rho ** 2 * self.noise_low.variance + self.noise_diff.variance

    def cross_cov(self, X_new, X_low, X_high, shared_noise: bool = True) -> np.ndarray:
        """Covariances between high-fidelity values at `X_new` and the stacked sample.

        With `shared_noise`, a query is paired like a high-fidelity
        observation: it shares ``rho * s_l^2`` with the first low-fidelity
        observation at exactly its input, and ``rho^2 s_l^2`` with every high
        observation paired with that same low observation.
        """
        rho = self.rho
        low = self.kernel_low.cov_matrix(X_new, X_low)
        high = rho ** 2 * self.kernel_low.cov_matrix(X_new, X_high) + self.kernel_diff.cov_matrix(X_new, X_high)
        if shared_noise:
            pairs = coincidence(X_new, X_low)
            low = low + self.noise_low.variance * pairs
            high = high + rho ** 2 * self.noise_low.variance * (pairs @ coincidence(X_high, X_low).T)
        return np.hstack([rho * low, high])

    def prior_high(self, X_new) -> np.ndarray:
        """Prior covariance of noisy high-fidelity values at `X_new`."""
        K = self.rho ** 2 * self.kernel_low.cov_matrix(X_new) + self.kernel_diff.cov_matrix(X_new)
        K[np.diag_indices_from(K)] += self.high_noise
        return K

    def prior_high_diag(self, X_new) -> np.ndarray:
        return (self.rho ** 2 * self.kernel_low.diag(X_new) + self.kernel_diff.diag(X_new)
                + self.high_noise)


def assemble_joint_cov(params: VfParams, X_low, X_high) -> np.ndarray:
    """Joint covariance of the stacked sample ``(y_l; y_h)``.

    Low-low block ``K_l + s_l^2 I``, cross block ``rho (K_l + s_l^2 E)``,
    and high-high block ``rho^2 K_l + K_d + (rho^2 s_l^2 + s_d^2) I`` plus
    ``rho^2 s_l^2`` off the diagonal of ``E^T E``. `E` pairs each high input
    with the first low input equal to it (see :func:`coincidence`): a
    high-fidelity observation carries ``rho`` times the nugget of its paired
    low observation, so two high observations with the same partner share
    ``rho^2`` times it.
    """
    X_low = as_points(X_low, params.kernel_low.dim)
    X_high = as_points(X_high, params.kernel_low.dim)
    rho = params.rho
    n_l = X_low.shape[0]
    kl = params.kernel_low.cov_matrix(np.vstack([X_low, X_high]))
    K = kl.copy()
    K[:n_l, n_l:] *= rho
    K[n_l:, :n_l] *= rho
    pairs = coincidence(X_high, X_low)
    shared = rho * params.noise_low.variance * pairs.T
    K[:n_l, n_l:] += shared
    K[n_l:, :n_l] += shared.T
    same_partner = pairs @ pairs.T
    np.fill_diagonal(same_partner, 0.0)
    K[n_l:, n_l:] = (rho ** 2 * kl[n_l:, n_l:] + params.kernel_diff.cov_matrix(X_high)
                     + rho ** 2 * params.noise_low.variance * same_partner)
    d = np.arange(K.shape[0])
    K[d[:n_l], d[:n_l]] += params.noise_low.variance
    K[d[n_l:], d[n_l:]] += params.high_noise
    return K


@dataclass(frozen=True)
class VfgpModel:
    """Fitted co-kriging model with a cached joint Cholesky factor.

    `low_map` and `high_map` share the input map and the response scale and
    differ only in the response offset.
    """

    params: VfParams
    training: VfDataset
    low_map: AffineMap
    high_map: AffineMap
    joint_factor: CholeskyFactor
    weights: np.ndarray
    fit_report_low: Optional[FitReport] = None
    fit_report_diff: Optional[FitReport] = None

    @classmethod
    def from_params(cls, params: VfParams, training: VfDataset,
                    low_map: Optional[AffineMap] = None, high_map: Optional[AffineMap] = None,
                    fit_report_low=None, fit_report_diff=None,
                    with_inverse: bool = False) -> "VfgpModel":
        d = training.dim
        if params.kernel_low.dim != d or params.kernel_diff.dim != d:
            raise DimensionMismatch("kernel dimension does not match data dimension")
        low_map = AffineMap.identity(d) if low_map is None else low_map
        high_map = low_map if high_map is None else high_map
        K = assemble_joint_cov(params, low_map.x(training.low.X), high_map.x(training.high.X))
        factor = cholesky(K)
        if with_inverse:
            factor = factor.with_inverse()
        ys = np.concatenate([low_map.y(training.low.y), high_map.y(training.high.y)])
        weights = factor.solve(ys)
        weights.setflags(write=False)
        return cls(params, training, low_map, high_map, factor, weights, fit_report_low, fit_report_diff)

    @property
    def dim(self) -> int:
        return self.training.dim

    @property
    def rho(self) -> float:
        return self.params.rho

    def standardized_inputs(self):
        return self.low_map.x(self.training.low.X), self.high_map.x(self.training.high.X)

    def standardized_y(self) -> np.ndarray:
        return np.concatenate([self.low_map.y(self.training.low.y), self.high_map.y(self.training.high.y)])

    def predict(self, X_new, full_cov: bool = True):
        return predict(self, X_new, full_cov)


def _make_maps(data: VfDataset):
    """Common input box over both samples; per-fidelity offsets; low-fidelity scale."""
    X_all = np.vstack([data.low.X, data.high.X])
    base = AffineMap.from_data(X_all, data.low.y)
    low_map = base.with_y_offset(float(np.mean(data.low.y)))
    high_map = base.with_y_offset(float(np.mean(data.high.y)))
    return low_map, high_map


def _diff_objective(X_h, y_h, y_l_hat):
    """Likelihood of ``y_h - rho * y_l_hat`` over [kernel log params, log s_d^2, rho]."""

    def fun(p):
        rho = p[-1]
        resid = y_h - rho * y_l_hat
        value, grad, alpha = gp.log_likelihood_and_grad(X_h, resid, p[:-1], return_alpha=True)
        # d/drho of -0.5 r^T K^-1 r with dr/drho = -y_l_hat
        return value, np.append(grad, float(alpha @ y_l_hat))

    return fun


def fit(data: VfDataset, config: FitConfig = FitConfig(), with_inverse: bool = False) -> VfgpModel:
    """Three-step co-kriging fit.

    1. kernel and noise of the low-fidelity process by penalized MLE on the
       low sample (frozen afterwards);
    2. posterior mean of the low-fidelity observations at the high inputs
       (equal to the data where the inputs coincide);
    3. difference-process kernel, noise and ``rho`` by maximizing the
       likelihood of ``y_h - rho * y_l_hat``.
    """
    low_map, high_map = _make_maps(data)
    X_l = low_map.x(data.low.X)
    X_h = high_map.x(data.high.X)
    y_l = low_map.y(data.low.y)
    y_h = high_map.y(data.high.y)

    kernel_low, noise_low, report_low = gp.fit_kernel(X_l, y_l, config)
    low_model = gp.GpModel.from_params(kernel_low, noise_low, Dataset(X_l, y_l))
    y_l_hat, _ = gp.predict(low_model, X_h, full_cov=False)
    # a paired low observation shares the nugget, so there the prediction is the observation
    y_l_hat = y_l_hat + noise_low.variance * (coincidence(X_h, X_l) @ low_model.weights)

    x0 = np.append(gp.initial_log_params(X_h, y_h), 1.0)
    var_h = float(np.var(y_h)) if y_h.size > 1 and np.var(y_h) > 0 else 1.0
    bounds = gp.log_bounds(x0[:-1], np.log(config.floor * var_h)) + [(None, None)]
    mask = np.append(np.ones(x0.size - 1), 0.0)
    p, report_diff = gp.multistart_maximize(
        _diff_objective(X_h, y_h, y_l_hat), x0, bounds, config, penalty_mask=mask,
    )
    params = VfParams(
        kernel_low, noise_low,
        SeKernel.from_log_params(p[:-2]), NoiseSpec(float(np.exp(p[-2]))), float(p[-1]),
    )
    return VfgpModel.from_params(params, data, low_map, high_map, report_low, report_diff,
                                 with_inverse=with_inverse)


def predict(model: VfgpModel, X_new, full_cov: bool = True):
    """Posterior mean and covariance of the high-fidelity response at `X_new`.

    Returns ``(mean, cov)``; `cov` is the variance vector when ``full_cov`` is
    False. Diagonal entries are clamped at 0.
    """
    Xs = model.high_map.x(as_points(X_new, model.dim))
    X_l, X_h = model.standardized_inputs()
    p = model.params
    K_star = p.cross_cov(Xs, X_l, X_h)
    mean = K_star @ model.weights
    A = solve_lower(model.joint_factor, K_star.T)
    if full_cov:
        cov = p.prior_high(Xs) - A.T @ A
        cov = 0.5 * (cov + cov.T)
        idx = np.diag_indices_from(cov)
        cov[idx] = np.maximum(cov[idx], 0.0)
        return model.high_map.y_back(mean), model.high_map.var_back(cov)
    var = p.prior_high_diag(Xs) - np.sum(A * A, axis=0)
    return model.high_map.y_back(mean), model.high_map.var_back(np.maximum(var, 0.0))
