"""
Forrester toy problem: what a cheap low-fidelity code buys you.

We have 15 evaluations of the expensive function and 100 of a cheap,
biased approximation. A plain GP sees only the 15 expensive points.
Co-kriging also learns from the cheap sample, and the blackbox variant
goes one step further by calling the cheap code at every prediction point.

Run with ``python3 demos/forrester_three_models.py``.
"""

import numpy as np

from vfgpr import bbvfgp, gp, vfgp
from vfgpr import experiments as ex

data = ex.toy_sample(n_h=15, n_l=100, seed=0)
x_test = np.linspace(0.0, 1.0, 1000)
y_test = ex.toy_high(x_test)

single = gp.fit(data.high)
print(f"GP on the 15 expensive points      RRMS {ex.rrms(y_test, single.predict(x_test, full_cov=False)[0]):.2e}")

cokriging = vfgp.fit(data)
print(f"co-kriging, 15 + 100 points        RRMS {ex.rrms(y_test, cokriging.predict(x_test, full_cov=False)[0]):.2e}")
print(f"  fitted scale between fidelities  rho = {cokriging.rho:.4f} (the cheap code is half the expensive one)")

blackbox = bbvfgp.from_model(cokriging, ex.toy_low)
mean, var, _, calls = blackbox.predict_batch(x_test)
print(f"co-kriging plus cheap-code calls   RRMS {ex.rrms(y_test, mean):.2e} ({calls} cheap evaluations)")

# the predictive variance shrinks once the cheap value at the query is known
_, var_plain = cokriging.predict(x_test, full_cov=False)
print(f"median predictive std: co-kriging {np.median(np.sqrt(var_plain)):.2e}, "
      f"with blackbox {np.median(np.sqrt(var)):.2e}")
