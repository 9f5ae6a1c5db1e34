import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from vfgpr import NoiseSpec, SeKernel, VfParams  # noqa: E402
from vfgpr.gp import Dataset  # noqa: E402
from vfgpr.vfgp import VfDataset  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

#: pass/fail lines emitted by the acceptance tests, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_params(rng, d, rho=None):
    """Random positive co-kriging parameters of moderate conditioning."""
    return VfParams(
        SeKernel(rng.uniform(0.5, 2.0), rng.uniform(0.5, 3.0, d)),
        NoiseSpec(rng.uniform(1e-3, 1e-1)),
        SeKernel(rng.uniform(0.2, 1.0), rng.uniform(0.5, 3.0, d)),
        NoiseSpec(rng.uniform(1e-3, 1e-1)),
        rng.uniform(-2.0, 2.0) if rho is None else rho,
    )


def random_instance(rng, d=None, n_l=None, n_h=None, nested=False):
    """Random parameters plus a random two-fidelity sample (d <= 4, n_l <= 30, n_h <= 15)."""
    d = int(rng.integers(1, 5)) if d is None else d
    n_l = int(rng.integers(2, 31)) if n_l is None else n_l
    n_h = int(rng.integers(1, min(15, n_l) + 1)) if n_h is None else n_h
    params = random_params(rng, d)
    X_l = rng.random((n_l, d))
    X_h = X_l[rng.choice(n_l, n_h, replace=False)] if nested else rng.random((n_h, d))
    data = VfDataset(Dataset(X_l, rng.standard_normal(n_l)), Dataset(X_h, rng.standard_normal(n_h)))
    return params, data


def rel_err(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
