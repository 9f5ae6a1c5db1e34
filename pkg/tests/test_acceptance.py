"""
Acceptance criteria, one test each.

Every test records a single ``criterion N: PASS|FAIL ...`` line, prints it,
and lists it again in the terminal summary. Criterion 6 runs the
six-dimensional benchmark at n_l in {1000, 3000} and takes tens of minutes.
"""

import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from vfgpr import bbvfgp, experiments as ex, gp
from vfgpr.experiments import ExperimentPlan
from vfgpr.numerics import cholesky, extend_cholesky, extend_inverse_cholesky
from vfgpr.svfgp import BaseSelection, SvfgpModel
from vfgpr.vfgp import VfgpModel

from conftest import ACCEPTANCE_LINES, random_instance, rel_err
from oracles import VfOracle

N_INSTANCES = 120


def record(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def instances(seed, nested_every=0):
    """Random instances (d <= 4, n_l <= 30, n_h <= 15); every k-th one nested when k > 0."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(N_INSTANCES):
        nested = nested_every > 0 and i % nested_every == 0
        p, data = random_instance(rng, nested=nested)
        Xs = np.vstack([rng.random((4, data.dim)), data.low.X[:1], data.high.X[:1]])
        out.append((p, data, Xs))
    return out


def test_criterion_1_exact_inference_oracle():
    worst = 0.0
    for p, data, Xs in instances(101, nested_every=3):
        mean, var = VfgpModel.from_params(p, data).predict(Xs, full_cov=False)
        m_ref, v_ref = VfOracle(p).predict(data.low.X, data.high.X, data.y, Xs)
        worst = max(worst, rel_err(mean, m_ref), rel_err(var, v_ref))
    record(1, worst <= 1e-9, f"{N_INSTANCES} instances, worst relative error {worst:.2e} (tol 1e-9)")


def test_criterion_2_full_rank_nystrom():
    worst, used, skipped = 0.0, 0, 0
    for p, data, Xs in instances(101):
        sparse = SvfgpModel.from_params(p, data, BaseSelection.full(data))
        if sparse.V11.jitter > 0:
            # the noise-free base covariance is numerically singular; jitter
            # makes the low-rank factor differ from the exact one
            skipped += 1
            continue
        # random queries only: at a training input the exact model pairs the
        # query with that observation's nugget, which the sparse form cannot
        Xr = Xs[:4]
        mean, var = sparse.predict(Xr)
        m_ref, v_ref = VfgpModel.from_params(p, data).predict(Xr, full_cov=False)
        worst = max(worst, rel_err(mean, m_ref), rel_err(var, v_ref))
        used += 1
    record(2, worst <= 1e-8 and used >= 80,
           f"{used} instances ({skipped} needing jitter on the base factor skipped), worst relative error {worst:.2e} (tol 1e-8)")


def test_criterion_3_expanded_system():
    worst = 0.0
    for p, data, Xs in instances(103, nested_every=3):
        model = bbvfgp.from_model(VfgpModel.from_params(p, data), lambda x: float(np.cos(np.sum(x))))
        o = VfOracle(p)
        for x in Xs:
            mean, var, y_new = model.predict_one(x)
            m_ref, v_ref = o.predict_expanded(data.low.X, data.high.X, data.y, x, y_new)
            worst = max(worst, rel_err(mean, m_ref), rel_err(var, v_ref))
    record(3, worst <= 1e-9, f"{N_INSTANCES} instances x 6 queries, worst relative error {worst:.2e} (tol 1e-9)")


def _extension_time(n, rng, reps=20):
    A = rng.standard_normal((n + 1, n + 1))
    K = A @ A.T + (n + 1) * np.eye(n + 1)
    f = cholesky(K[:n, :n]).with_inverse()
    best = np.inf
    for _ in range(5):
        t = time.perf_counter()
        for _ in range(reps):
            g = extend_cholesky(f, K[:n, n], K[n, n])
            extend_inverse_cholesky(f, g)
        best = min(best, (time.perf_counter() - t) / reps)
    return best


def test_criterion_4_cholesky_extension():
    rng = np.random.default_rng(104)
    worst = 0.0
    for n in (1, 2, 5, 10, 25, 50, 100, 150, 199):
        for _ in range(3):
            A = rng.standard_normal((n + 1, n + 1))
            K = A @ A.T + (n + 1) * np.eye(n + 1)
            f = cholesky(K[:n, :n]).with_inverse()
            g = extend_cholesky(f, K[:n, n], K[n, n])
            L = np.linalg.cholesky(K)
            worst = max(worst, np.max(np.abs(g.lower - L)) / np.max(np.abs(L)))
            Linv = np.linalg.inv(L)
            inv = extend_inverse_cholesky(f, g)
            worst = max(worst, np.max(np.abs(inv - Linv)) / np.max(np.abs(Linv)))
    # sizes start above the point where L and L^-1 stop fitting in cache
    ns = np.array([500, 1000, 1500, 2000])
    t = np.array([_extension_time(n, rng) for n in ns])
    # quadratic fit t = b n^2 (geometric mean of t / n^2), every point within x2
    scaled = t / ns.astype(float) ** 2
    band = scaled / np.exp(np.mean(np.log(scaled)))
    in_band = bool(np.all(band <= 2.0) and np.all(band >= 0.5))
    doubling = t[-1] / t[1]
    ok = worst <= 1e-9 and in_band and doubling < 6.0
    record(4, ok, f"max relative error {worst:.2e} up to n=200 (tol 1e-9); per-extension seconds "
                  f"{', '.join(f'{v:.2e}' for v in t)} at n={ns.tolist()}, quadratic fit within x2 band: "
                  f"{in_band} (t / fit {', '.join(f'{v:.2f}' for v in band)}), "
                  f"t(2000)/t(1000) = {doubling:.2f} (cubic would be 8)")


def test_criterion_5_toy_table():
    plan = ExperimentPlan("toy", 100, 15, seeds=tuple(range(50)))
    report = ex.run_toy_experiment(plan)
    g, v, b = (report.cell(m)["rrms_mean"] for m in ("gp", "vfgp", "bbvfgp"))
    ok = (not report.failed and g > v > b and 0.003 <= g <= 0.08 and v <= 1e-2 and b <= 1e-4)
    record(5, ok, f"n_h=15, 50 seeds: GP {g:.3g}, VFGP {v:.3g}, BB VFGP {b:.3g} "
                  "(need GP > VFGP > BB, GP in [0.003, 0.08], VFGP <= 1e-2, BB <= 1e-4)")


@pytest.fixture(scope="module")
def highdim_report():
    return ex.run_highdim_suite(n_l_values=(1000, 3000), n_h=100, seeds=(0, 1, 2))


@pytest.mark.slow
def test_criterion_6_highdim_table(highdim_report):
    r = highdim_report
    print()
    print(r.render())

    def m(method, regime, n_l, key="rrms"):
        return r.cell(method, regime, n_l)[f"{key}_mean"]

    t_sv = m("svfgp", "interpolation", 3000, "fit_time") / m("svfgp", "interpolation", 1000, "fit_time")
    t_vf = m("vfgp", "interpolation", 3000, "fit_time") / m("vfgp", "interpolation", 1000, "fit_time")
    ok_a = t_sv < 2.0 and t_vf > 10.0
    ratios_b = [m("bbvfgp", "extrapolation", n) / m("svfgp", "extrapolation", n) for n in (1000, 3000)]
    ok_b = all(x <= 0.1 for x in ratios_b)
    ratios_c = [m("bbvfgp", "interpolation", n) / m("vfgp", "interpolation", n) for n in (1000, 3000)]
    ok_c = all(x <= 0.1 for x in ratios_c)
    detail = (f"(a) fit time ratio 3000/1000: SVFGP {t_sv:.2f} (need < 2), VFGP {t_vf:.2f} (need > 10) "
              f"[{'ok' if ok_a else 'violated'}]; "
              f"(b) extrapolation BB/SVFGP RRMS at n_l 1000, 3000: {ratios_b[0]:.3g}, {ratios_b[1]:.3g} "
              f"(need <= 0.1) [{'ok' if ok_b else 'violated'}]; "
              f"(c) interpolation BB/VFGP RRMS at n_l 1000, 3000: {ratios_c[0]:.3g}, {ratios_c[1]:.3g} "
              f"(need <= 0.1) [{'ok' if ok_c else 'violated'}]")
    record(6, not r.failed and ok_a and ok_b and ok_c, detail)


def test_criterion_7_invariant_suites():
    suite = Path(__file__).with_name("test_properties.py")
    t0 = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", str(suite)],
                          capture_output=True, text=True, cwd=suite.parent.parent)
    elapsed = time.perf_counter() - t0
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr.strip()
    record(7, proc.returncode == 0 and elapsed < 60.0,
           f"property suites: {summary} in {elapsed:.1f} s (limit 60 s)")


def test_criterion_8_gradient_check():
    rng = np.random.default_rng(108)
    worst = 0.0
    h = 1e-5
    for _ in range(20):
        n, d = int(rng.integers(5, 31)), int(rng.integers(1, 5))
        X, y = rng.random((n, d)), rng.standard_normal(n)
        p = np.concatenate([[rng.uniform(-1, 1)], rng.uniform(-1.5, 2.0, d), [rng.uniform(-6, -1)]])
        _, g = gp.log_likelihood_and_grad(X, y, p)
        for i in range(p.size):
            e = np.zeros_like(p)
            e[i] = h
            fd = (gp.log_likelihood_and_grad(X, y, p + e)[0] - gp.log_likelihood_and_grad(X, y, p - e)[0]) / (2 * h)
            worst = max(worst, abs(g[i] - fd) / max(abs(fd), 1e-4))
    record(8, worst <= 1e-4, f"20 instances, worst relative gradient error {worst:.2e} (tol 1e-4)")
