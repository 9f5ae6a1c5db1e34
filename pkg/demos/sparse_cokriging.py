"""
Sparse co-kriging on the six-dimensional Rastrigin pair.

Exact co-kriging costs O(n^3) to fit. The sparse model estimates its
parameters on a random subset of base points and then uses the whole sample
through a Nystrom approximation, at O(n n1^2). This script compares the two
on a small instance and prints the approximation diagnostic. Expect the
sparse fit to be much faster and somewhat less accurate here: its
parameters come from the base subsample alone.

Run with ``python3 demos/sparse_cokriging.py`` (about a minute).
"""

import time

import numpy as np

from vfgpr import svfgp, vfgp
from vfgpr import experiments as ex
from vfgpr.gp import FitConfig

config = FitConfig(restarts=2, seed=0)
data = ex.highdim_sample(n_l=600, n_h=60, regime="interpolation", seed=0)
test = ex.highdim_test("interpolation", 500, seed=0)

t0 = time.perf_counter()
exact = vfgp.fit(data, config)
t_exact = time.perf_counter() - t0
print(f"exact co-kriging   n = {data.low.n + data.high.n:4d}  fit {t_exact:6.1f} s  "
      f"RRMS {ex.rrms(test, exact.predict(test.X, full_cov=False)[0]):.3f}")

for n_base in (100, 300):
    t0 = time.perf_counter()
    sparse = svfgp.fit(data, n_base, data.high.n, config)
    t_sparse = time.perf_counter() - t0
    err_cross, err_self = svfgp.nystrom_diagnostic(sparse, test.X[:200])
    print(f"sparse, {n_base:3d} low base points  fit {t_sparse:6.1f} s  "
          f"RRMS {ex.rrms(test, sparse.predict(test.X)[0]):.3f}  "
          f"Nystrom error cross {err_cross:.2e} self {err_self:.2e}")
