"""
Co-kriging prediction augmented by a low-fidelity blackbox.

At each query point the low-fidelity oracle is evaluated and its value is
appended to the training sample as one extra low-fidelity observation. The
joint Cholesky factor and its inverse are bordered in O(n^2), so a query
costs O(n^2) instead of a full refactorization. Hyperparameters are never
re-estimated and extensions are not chained across queries.
"""

import subprocess
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DimensionMismatch, OracleFailure
from .kernels import as_points
from .numerics import border_row, inverse_border_row
from .vfgp import VfgpModel, coincidence


def _scalar(value) -> float:
    a = np.asarray(value, dtype=float)
    if a.size != 1:
        raise ValueError(f"expected one value, got shape {a.shape}")
    return float(a.reshape(-1)[0])


class LowFidelityOracle:
    """Memoizing wrapper around a callable ``point -> low-fidelity value``.

    Parameters
    ----------
    func : callable
        Takes a 1-D array of length d and returns a float.
    serial : bool
        Hold a lock around every call to `func`.
    """

    def __init__(self, func: Callable[[np.ndarray], float], serial: bool = True):
        self.func = func
        self.serial = serial
        self.calls = 0
        self._cache = {}
        self._lock = threading.Lock()

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float).ravel()
        key = x.tobytes()
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        try:
            if self.serial:
                with self._lock:
                    value = _scalar(self.func(x))
            else:
                value = _scalar(self.func(x))
        except OracleFailure:
            raise
        except Exception as exc:
            raise OracleFailure(f"oracle failed at {x.tolist()}: {exc}", point=x) from exc
        if not np.isfinite(value):
            raise OracleFailure(f"oracle returned {value!r} at {x.tolist()}", point=x)
        with self._lock:
            if key not in self._cache:
                self._cache[key] = value
                self.calls += 1
            return self._cache[key]


class ProcessOracle:
    """Low-fidelity function served by a child process.

    The child reads one whitespace-separated point per line on stdin and
    writes one value per line on stdout.
    """

    def __init__(self, argv, timeout: Optional[float] = 60.0):
        self.argv = list(argv) if not isinstance(argv, str) else [argv]
        self.timeout = timeout
        self._proc = None

    def _start(self):
        self._proc = subprocess.Popen(
            self.argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            text=True, bufsize=1,
        )

    def __call__(self, x) -> float:
        if self._proc is None or self._proc.poll() is not None:
            self._start()
        line = " ".join(repr(float(v)) for v in np.ravel(x))
        try:
            self._proc.stdin.write(line + "\n")
            self._proc.stdin.flush()
            reply = self._proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise OracleFailure(f"oracle process failed: {exc}", point=np.ravel(x)) from exc
        if not reply:
            raise OracleFailure("oracle process closed its output", point=np.ravel(x))
        try:
            return float(reply.strip())
        except ValueError:
            raise OracleFailure(f"oracle replied {reply.strip()!r}", point=np.ravel(x)) from None

    def close(self):
        if self._proc is not None:
            if self._proc.stdin:
                self._proc.stdin.close()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
            self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


@dataclass(frozen=True)
class BbVfgpModel:
    """A fitted co-kriging model whose joint factor carries ``L`` and ``L^{-1}``."""

    base: VfgpModel
    oracle: LowFidelityOracle
    # cached standardized training inputs/responses and L^{-1} y
    _X_low: np.ndarray = field(repr=False, default=None)
    _X_high: np.ndarray = field(repr=False, default=None)
    _y: np.ndarray = field(repr=False, default=None)
    _z: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        base = self.base
        if base.joint_factor.inverse is None:
            f = base.joint_factor.with_inverse()
            base = VfgpModel(base.params, base.training, base.low_map, base.high_map, f,
                             base.weights, base.fit_report_low, base.fit_report_diff)
            object.__setattr__(self, "base", base)
        if not isinstance(self.oracle, LowFidelityOracle):
            object.__setattr__(self, "oracle", LowFidelityOracle(self.oracle))
        X_l, X_h = base.standardized_inputs()
        y = base.standardized_y()
        z = base.joint_factor.inverse @ y
        for name, a in (("_X_low", X_l), ("_X_high", X_h), ("_y", y), ("_z", z)):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def dim(self) -> int:
        return self.base.dim

    def predict_one(self, x):
        return predict_one(self, x)

    def predict_batch(self, X_new):
        return predict_batch(self, X_new)


def from_model(model: VfgpModel, oracle) -> BbVfgpModel:
    return BbVfgpModel(model, oracle)


def expanded_system(model: BbVfgpModel, x):
    """Pieces of the (n+1)-point system in standardized units.

    Returns ``(column, diagonal, k_exp, prior)``: the new column of the joint
    covariance, its diagonal entry, the cross-covariance of the high-fidelity
    value at `x` with the expanded sample, and the prior variance at `x`.
    """
    p = model.base.params
    X_l, X_h = model._X_low, model._X_high
    xs = np.asarray(x, dtype=float).reshape(1, -1)
    kl_low = p.kernel_low.cov_matrix(xs, X_l)[0]
    kl_high = p.kernel_low.cov_matrix(xs, X_h)[0]
    kl_self = float(p.kernel_low.diag(xs)[0])
    diagonal = kl_self + p.noise_low.variance
    k_exp = p.cross_cov(xs, X_l, X_h)[0]
    shared = kl_self
    if not coincidence(xs, X_l).any():
        # the new observation is the first low one at x, so high values at x
        # (the query included) pair with it and share its nugget
        at_x = coincidence(X_h, xs)[:, 0]
        kl_high = kl_high + p.noise_low.variance * at_x
        k_exp[X_l.shape[0]:] += p.rho ** 2 * p.noise_low.variance * at_x
        shared = diagonal
    column = np.concatenate([kl_low, p.rho * kl_high])
    k_exp = np.append(k_exp, p.rho * shared)
    prior = float(p.prior_high_diag(xs)[0])
    return column, diagonal, k_exp, prior


def predict_one(model: BbVfgpModel, x):
    """Posterior mean and variance of the high-fidelity value at one point.

    The oracle is queried at `x`; its value enters the sample as an extra
    low-fidelity observation. Returns ``(mean, variance, oracle_value)`` in
    original units; the variance is clamped at 0.
    """
    base = model.base
    x = np.asarray(x, dtype=float).ravel()
    if x.size != base.dim:
        raise DimensionMismatch(f"point has dimension {x.size}, expected {base.dim}")
    y_low = model.oracle(x)
    xs = base.high_map.x(x)
    column, diagonal, k_exp, prior = expanded_system(model, xs)
    f = base.joint_factor
    row, pivot, _ = border_row(f, column, diagonal)
    inv_last = inverse_border_row(f.inverse, row, pivot)
    n = f.n
    # L'^{-1} y_exp and L'^{-1} k_exp share their leading n entries with L^{-1} y, L^{-1} k
    z_last = float(inv_last[:n] @ model._y) + inv_last[n] * float(base.low_map.y(y_low))
    w = np.empty(n + 1)
    w[:n] = f.inverse @ k_exp[:n]
    w[n] = float(inv_last @ k_exp)
    mean = float(w[:n] @ model._z) + w[n] * z_last
    var = max(prior - float(w @ w), 0.0)
    return float(base.high_map.y_back(mean)), float(base.high_map.var_back(var)), y_low


def predict_batch(model: BbVfgpModel, X_new):
    """Apply :func:`predict_one` to each row of `X_new`.

    Returns ``(mean, variance, oracle_values, oracle_calls)`` where
    `oracle_calls` counts new oracle evaluations made by this batch.
    """
    X_new = as_points(X_new, model.dim)
    if X_new.shape[0] == 0:
        raise ValueError("empty query set")
    before = model.oracle.calls
    out = np.empty((X_new.shape[0], 3))
    for i, x in enumerate(X_new):
        out[i] = predict_one(model, x)
    return out[:, 0], out[:, 1], out[:, 2], model.oracle.calls - before
