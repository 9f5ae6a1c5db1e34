"""
Bordering a Cholesky factor instead of refactorizing.

Adding one row and column to an SPD matrix changes its Cholesky factor only
in the last row, and the inverse factor only in its last row too. Both can
be computed in O(n^2), which is what makes blackbox-augmented prediction
affordable. This script checks the result against a full refactorization
and times both.

Run with ``python3 demos/incremental_cholesky.py``.
"""

import time

import numpy as np

from vfgpr.numerics import cholesky, extend_cholesky, extend_inverse_cholesky

rng = np.random.default_rng(0)
for n in (500, 1000, 2000):
    A = rng.standard_normal((n + 1, n + 1))
    K = A @ A.T + (n + 1) * np.eye(n + 1)
    factor = cholesky(K[:n, :n]).with_inverse()

    t0 = time.perf_counter()
    bordered = extend_cholesky(factor, K[:n, n], K[n, n])
    inverse = extend_inverse_cholesky(factor, bordered)
    t_border = time.perf_counter() - t0

    t0 = time.perf_counter()
    full = cholesky(K).with_inverse()
    t_full = time.perf_counter() - t0

    err = max(np.abs(bordered.lower - full.lower).max(), np.abs(inverse - full.inverse).max())
    print(f"n = {n:4d}: bordered {t_border * 1e3:7.2f} ms, refactorized {t_full * 1e3:8.2f} ms, "
          f"max difference {err:.1e}")
