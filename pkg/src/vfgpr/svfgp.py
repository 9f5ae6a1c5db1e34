"""
Sparse co-kriging through a Nystrom approximation of the joint covariance.

A subset of base points anchors a low-rank approximation of the noise-free
joint covariance. Parameters come from an exact co-kriging fit on the base
subsample; inference then uses the whole sample at O(n * n1^2) cost, with
every solve going through the Cholesky factor of ``I + V^T V``.

Notation (standardized units): ``K11`` joint covariance of the base points,
``K1`` covariance between base points and the full sample, ``R`` diagonal
with ``1/s_l`` on low rows and ``1/sqrt(rho^2 s_l^2 + s_d^2)`` on high rows,
``K11 = L11 L11^T`` and ``V = R K1^T L11^{-T}``.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import vfgp
from .errors import SubsampleTooLarge
from .gp import AffineMap, FitConfig
from .kernels import as_points
from .numerics import CholeskyFactor, cholesky, solve_lower
from .vfgp import VfDataset, VfParams, VfgpModel


@dataclass(frozen=True)
class BaseSelection:
    """Indices of the base points within each fidelity (sorted)."""

    low_indices: np.ndarray
    high_indices: np.ndarray
    seed: Optional[int] = None

    def __post_init__(self):
        for name in ("low_indices", "high_indices"):
            a = np.array(getattr(self, name), dtype=int).ravel()
            if np.unique(a).size != a.size:
                raise ValueError(f"{name} contains duplicates")
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if self.size < 1:
            raise ValueError("base selection is empty")

    @property
    def size(self) -> int:
        return self.low_indices.size + self.high_indices.size

    def subsample(self, data: VfDataset) -> VfDataset:
        return VfDataset(data.low.subset(self.low_indices), data.high.subset(self.high_indices))

    @classmethod
    def full(cls, data: VfDataset) -> "BaseSelection":
        return cls(np.arange(data.low.n), np.arange(data.high.n))


def _weighted_subset(rng, weights, k):
    n = weights.size
    if k > n:
        raise SubsampleTooLarge(f"cannot select {k} base points from {n}")
    if k == n:
        return np.arange(n)
    w = np.asarray(weights, dtype=float)
    return np.sort(rng.choice(n, size=k, replace=False, p=w / w.sum()))


def select_base_points(data: VfDataset, n1_low: int, n1_high: int, seed: int = 0,
                       self_cov_low: Optional[Callable] = None,
                       self_cov_high: Optional[Callable] = None) -> BaseSelection:
    """Draw base points without replacement, weighted by self-covariance.

    `self_cov_low` / `self_cov_high` map an (n, d) array to the prior
    variances ``k(x, x)`` of that fidelity. When omitted (or for any
    stationary kernel) the weights are equal and selection is uniform.
    """
    rng = np.random.default_rng(seed)
    w_low = np.ones(data.low.n) if self_cov_low is None else np.asarray(self_cov_low(data.low.X))
    w_high = np.ones(data.high.n) if self_cov_high is None else np.asarray(self_cov_high(data.high.X))
    low = _weighted_subset(rng, w_low, n1_low)
    high = _weighted_subset(rng, w_high, n1_high)
    return BaseSelection(low, high, seed)


def joint_cross_cov(params: VfParams, Xb_low, Xb_high, X_low, X_high) -> np.ndarray:
    """Noise-free joint covariance between base points (rows) and a stacked sample (columns)."""
    rho = params.rho
    kl = params.kernel_low
    top = np.hstack([kl.cov_matrix(Xb_low, X_low), rho * kl.cov_matrix(Xb_low, X_high)])
    bottom = np.hstack([
        rho * kl.cov_matrix(Xb_high, X_low),
        rho ** 2 * kl.cov_matrix(Xb_high, X_high) + params.kernel_diff.cov_matrix(Xb_high, X_high),
    ])
    return np.vstack([top, bottom])


@dataclass(frozen=True)
class SvfgpModel:
    """Nystrom co-kriging model with precomputed factors.

    Attributes
    ----------
    params : VfParams
        Process parameters (fitted on the base subsample).
    training : VfDataset
        Full training sample.
    base : BaseSelection
    low_map, high_map : AffineMap
        Standardization shared with the base-subsample fit.
    V11 : CholeskyFactor
        Factor of ``K11``.
    V : ndarray of shape (n, n1)
    core_factor : CholeskyFactor
        Factor of ``I + V^T V``.
    projected_response : ndarray of shape (n1,)
        ``(I + V^T V)^{-1} V^T R y``.
    R_diag : tuple of float
        ``(1/s_l, 1/sqrt(rho^2 s_l^2 + s_d^2))``.
    """

    params: VfParams
    training: VfDataset
    base: BaseSelection
    low_map: AffineMap
    high_map: AffineMap
    V11: CholeskyFactor
    V: np.ndarray
    core_factor: CholeskyFactor
    projected_response: np.ndarray
    R_diag: tuple
    mean_weights: np.ndarray
    base_model: Optional[VfgpModel] = None

    @classmethod
    def from_params(cls, params: VfParams, training: VfDataset, base: BaseSelection,
                    low_map: Optional[AffineMap] = None, high_map: Optional[AffineMap] = None,
                    base_model: Optional[VfgpModel] = None) -> "SvfgpModel":
        d = training.dim
        low_map = AffineMap.identity(d) if low_map is None else low_map
        high_map = low_map if high_map is None else high_map
        if params.noise_low.variance <= 0 or params.high_noise <= 0:
            raise ValueError("sparse inference needs positive noise variances")
        X_l = low_map.x(training.low.X)
        X_h = high_map.x(training.high.X)
        Xb_l, Xb_h = X_l[base.low_indices], X_h[base.high_indices]
        y = np.concatenate([low_map.y(training.low.y), high_map.y(training.high.y)])

        K11 = joint_cross_cov(params, Xb_l, Xb_h, Xb_l, Xb_h)
        V11 = cholesky(0.5 * (K11 + K11.T))
        K1 = joint_cross_cov(params, Xb_l, Xb_h, X_l, X_h)
        r_low = 1.0 / np.sqrt(params.noise_low.variance)
        r_high = 1.0 / np.sqrt(params.high_noise)
        r = np.concatenate([np.full(training.low.n, r_low), np.full(training.high.n, r_high)])
        # V^T = L11^{-1} K1 R
        V = solve_lower(V11, K1 * r).T
        n1 = base.size
        core = cholesky(np.eye(n1) + V.T @ V)
        projected = core.solve(V.T @ (r * y))
        # mean = K1* L11^{-T} projected
        mean_weights = solve_lower(V11, projected, trans=True)
        for a in (V, projected, mean_weights):
            a.setflags(write=False)
        return cls(params, training, base, low_map, high_map, V11, V, core, projected,
                   (float(r_low), float(r_high)), mean_weights, base_model)

    @property
    def dim(self) -> int:
        return self.training.dim

    def base_inputs(self):
        X_l = self.low_map.x(self.training.low.X[self.base.low_indices])
        X_h = self.high_map.x(self.training.high.X[self.base.high_indices])
        return X_l, X_h

    def predict(self, X_new, exact_prior: bool = True):
        return predict(self, X_new, exact_prior)


def fit(data: VfDataset, n1_low: int, n1_high: int, config: FitConfig = FitConfig(),
        seed: Optional[int] = None) -> SvfgpModel:
    """Fit parameters on the base subsample, then build the Nystrom factors on all data.

    The base points double as the parameter-estimation subsample.
    """
    seed = config.seed if seed is None else seed
    base = select_base_points(data, n1_low, n1_high, seed)
    base_model = vfgp.fit(base.subsample(data), config)
    return SvfgpModel.from_params(base_model.params, data, base,
                                  base_model.low_map, base_model.high_map, base_model)


def _projected_queries(model: SvfgpModel, Xs):
    Xb_l, Xb_h = model.base_inputs()
    # K1*^T: base points x queries
    K1s_T = model.params.cross_cov(Xs, Xb_l, Xb_h, shared_noise=False).T
    return K1s_T, solve_lower(model.V11, K1s_T)


def predict(model: SvfgpModel, X_new, exact_prior: bool = True):
    """Approximate posterior mean and variance of the high-fidelity response.

    The variance is ``diag(A^T (I + V^T V)^{-1} A) + rho^2 s_l^2 + s_d^2``
    with ``A = L11^{-1} K1*^T``. That form replaces the prior variance at the
    query by its Nystrom approximation ``diag(A^T A)``. With `exact_prior`
    (default) the residual ``k(x, x) - diag(A^T A)`` is added back, so a
    full-rank base reproduces exact co-kriging variances and far-away
    queries revert to the prior variance. With ``exact_prior=False`` the
    uncorrected form is returned, which tends to the noise variance far from
    the base points.

    Returns ``(mean, variance)`` vectors in original units.
    """
    Xs = model.high_map.x(as_points(X_new, model.dim))
    K1s_T, A = _projected_queries(model, Xs)
    mean = K1s_T.T @ model.mean_weights
    # diag(A^T (I + V^T V)^{-1} A) via the core factor
    B = solve_lower(model.core_factor, A)
    var = np.sum(B * B, axis=0) + model.params.high_noise
    if exact_prior:
        p = model.params
        prior = p.prior_high_diag(Xs) - p.high_noise
        var = var + np.maximum(prior - np.sum(A * A, axis=0), 0.0)
    return model.high_map.y_back(mean), model.high_map.var_back(var)


def nystrom_diagnostic(model: SvfgpModel, X_probe):
    """Relative spectral-norm errors of the Nystrom approximation at probe points.

    Returns ``(err_cross, err_self)`` for ``K(X*, X)`` and ``K(X*, X*)``,
    each ``||K - K_hat||_2 / ||K||_2``, computed densely. Random base
    selection is expected to drive the excess over the best rank-n1 error
    down like ``1/sqrt(n)``.
    """
    Xs = model.high_map.x(as_points(X_probe, model.dim))
    if Xs.shape[0] == 0:
        raise ValueError("probe set is empty")
    p = model.params
    X_l = model.low_map.x(model.training.low.X)
    X_h = model.high_map.x(model.training.high.X)
    _, A = _projected_queries(model, Xs)
    # L11^{-1} K1 = (R^{-1} V)^T
    r = np.concatenate([np.full(model.training.low.n, model.R_diag[0]),
                        np.full(model.training.high.n, model.R_diag[1])])
    P = (model.V / r[:, None]).T
    K_cross = p.cross_cov(Xs, X_l, X_h, shared_noise=False)
    K_self = p.prior_high(Xs)
    K_self[np.diag_indices_from(K_self)] -= p.high_noise

    def rel(K, K_hat):
        denom = np.linalg.norm(K, 2)
        return float(np.linalg.norm(K - K_hat, 2) / denom) if denom > 0 else 0.0

    return rel(K_cross, A.T @ P), rel(K_self, A.T @ A)
