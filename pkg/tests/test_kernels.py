import numpy as np
import pytest

from vfgpr.errors import DimensionMismatch
from vfgpr.kernels import NoiseSpec, SeKernel, add_noise_diagonal, as_points

from oracles import gram


def test_eval_examples():
    k = SeKernel(1.0, [1.0, 1.0])
    assert k.eval([0.3, 0.7], [0.3, 0.7]) == 1.0
    k2 = SeKernel(2.0, [1.0])
    assert k2.eval([0.0], [1.0]) == pytest.approx(4.0 * np.exp(-1.0), rel=1e-15)
    assert k2.eval([0.0], [1.0]) == pytest.approx(1.4715, abs=1e-4)


def test_eval_symmetric_and_bounded(rng):
    k = SeKernel(1.7, rng.uniform(0.1, 3.0, 3))
    for _ in range(20):
        a, b = rng.random(3), rng.random(3)
        assert k.eval(a, b) == k.eval(b, a)
        assert k.eval(a, b) <= k.variance


def test_zero_weights_constant():
    k = SeKernel(1.5, [0.0, 0.0])
    assert k.eval([0.0, 0.0], [10.0, -3.0]) == pytest.approx(2.25)


def test_eval_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        SeKernel(1.0, [1.0, 1.0]).eval([0.0], [1.0])


def test_cov_matrix_examples():
    k = SeKernel(1.0, [1.0])
    np.testing.assert_allclose(k.cov_matrix([[0.5]]), [[1.0]])
    e = np.exp(-1.0)
    np.testing.assert_allclose(k.cov_matrix([[0.0], [1.0]]), [[1.0, e], [e, 1.0]], rtol=1e-15)


def test_cov_matrix_matches_elementwise_and_transpose(rng):
    k = SeKernel(0.8, [0.5, 2.0, 1.0])
    A, B = rng.random((5, 3)), rng.random((4, 3))
    np.testing.assert_allclose(k.cov_matrix(A, B), gram(0.8, [0.5, 2.0, 1.0], A, B), rtol=1e-13)
    np.testing.assert_allclose(k.cov_matrix(A, B), k.cov_matrix(B, A).T, rtol=1e-15)
    np.testing.assert_allclose(k(A, B), k.cov_matrix(A, B))
    np.testing.assert_allclose(k.diag(A), np.full(5, 0.64), rtol=1e-15)


def test_gram_psd(rng):
    k = SeKernel(1.3, [4.0, 4.0])
    X = rng.random((20, 2))
    assert np.linalg.eigvalsh(k.cov_matrix(X)).min() >= -1e-10 * k.variance


def test_stationarity(rng):
    k = SeKernel(1.1, [1.0, 2.0])
    a, b, s = rng.random(2), rng.random(2), rng.standard_normal(2) * 5
    assert k.eval(a + s, b + s) == pytest.approx(k.eval(a, b), abs=1e-12)


def test_monotone_decay():
    k = SeKernel(1.0, [2.0])
    vals = [k.eval([0.0], [r]) for r in np.linspace(0, 3, 30)]
    assert np.all(np.diff(vals) < 0)


def test_invalid_parameters():
    with pytest.raises(ValueError):
        SeKernel(0.0, [1.0])
    with pytest.raises(ValueError):
        SeKernel(1.0, [-1.0])
    with pytest.raises(ValueError):
        NoiseSpec(-1e-3)


def test_log_params_round_trip():
    k = SeKernel(1.7, [0.3, 2.5])
    k2 = SeKernel.from_log_params(k.log_params())
    assert k2.output_scale == pytest.approx(1.7, rel=1e-15)
    np.testing.assert_allclose(k2.length_weights, [0.3, 2.5], rtol=1e-15)


def test_log_param_grad_matches_dense_derivatives(rng):
    k = SeKernel(1.2, [0.7, 1.9, 0.4])
    X = rng.random((15, 3))
    K = k.cov_matrix(X)
    W = rng.standard_normal((15, 15))
    W = W + W.T
    dense = [0.5 * np.sum(W * dK) for dK in k.gradients(X, K)]
    np.testing.assert_allclose(k.log_param_grad(X, K, W), dense, rtol=1e-10, atol=1e-12)


def test_gradients_match_finite_differences(rng):
    X = rng.random((6, 2))
    p = np.array([0.3, -0.2, 0.5])
    h = 1e-6
    grads = list(SeKernel.from_log_params(p).gradients(X))
    for i in range(p.size):
        e = np.zeros_like(p)
        e[i] = h
        fd = (SeKernel.from_log_params(p + e).cov_matrix(X) - SeKernel.from_log_params(p - e).cov_matrix(X)) / (2 * h)
        np.testing.assert_allclose(grads[i], fd, atol=1e-8)


def test_add_noise_diagonal(rng):
    m = np.eye(2)
    np.testing.assert_array_equal(add_noise_diagonal(m, NoiseSpec(0.0)), m)
    np.testing.assert_array_equal(add_noise_diagonal(m, NoiseSpec(0.5)), np.diag([1.5, 1.5]))
    A = rng.standard_normal((4, 4))
    S = A @ A.T
    shifted = np.linalg.eigvalsh(add_noise_diagonal(S, 0.3))
    np.testing.assert_allclose(shifted, np.linalg.eigvalsh(S) + 0.3, atol=1e-12)
    assert not np.shares_memory(add_noise_diagonal(m, 1.0), m)
    with pytest.raises(DimensionMismatch):
        add_noise_diagonal(np.ones((2, 3)), 0.1)


def test_as_points_shapes():
    assert as_points([1.0, 2.0], 2).shape == (1, 2)
    assert as_points([1.0, 2.0], 1).shape == (2, 1)
    with pytest.raises(DimensionMismatch):
        as_points(np.ones((3, 2)), 3)
