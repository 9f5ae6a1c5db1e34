import json

import numpy as np
import pytest

from vfgpr import experiments as ex
from vfgpr.errors import DegenerateTestSample, DimensionMismatch
from vfgpr.experiments import BenchmarkReport, ExperimentPlan
from vfgpr.gp import Dataset, FitConfig

FAST = FitConfig(restarts=1)


def test_toy_functions():
    assert ex.toy_high(0.0) == pytest.approx(4 * np.sin(-4.0), rel=1e-15)
    assert ex.toy_high(0.0) == pytest.approx(3.0272, abs=1e-4)
    assert ex.toy_high(1.0) == pytest.approx(15.8297, abs=1e-4)
    assert ex.toy_low(1.0) == pytest.approx(7.9149, abs=1e-4)
    assert ex.toy_low(0.0) == pytest.approx(-8.4864, abs=1e-4)


def test_rastrigin_functions():
    x = np.zeros(6)
    assert ex.rastrigin_high(x) == pytest.approx(-40.0, abs=1e-12)
    assert ex.rastrigin_low(x) == pytest.approx(-38.8, abs=1e-12)
    X = np.random.default_rng(0).random((5, 6))
    assert ex.rastrigin_high(X).shape == (5,)
    np.testing.assert_allclose(ex.rastrigin_high(X)[2], ex.rastrigin_high(X[2]), rtol=1e-15)


def test_rastrigin_noise_variance():
    X = np.zeros((100_000, 6))
    rng = np.random.default_rng(0)
    assert np.var(ex.rastrigin_high(X, rng)) == pytest.approx(0.001, rel=0.05)
    assert np.var(ex.rastrigin_low(X, rng)) == pytest.approx(0.002, rel=0.05)


def test_builtin_oracles_are_noise_free():
    x = np.full(6, 0.3)
    assert ex.BUILTIN_ORACLES["rastrigin_low"](x) == ex.BUILTIN_ORACLES["rastrigin_low"](x)
    assert ex.BUILTIN_ORACLES["rastrigin_low"](x) == pytest.approx(float(ex.rastrigin_low(x)))
    assert ex.BUILTIN_ORACLES["toy_low"]([0.4]) == pytest.approx(float(ex.toy_low(0.4)))


def test_lhs():
    x = ex.lhs(1, [(2.0, 3.0)], seed=0)
    assert x.shape == (1, 1) and 2.0 <= x[0, 0] <= 3.0
    n = 20
    box = [(0.0, 1.0), (-2.0, 2.0), (5.0, 6.0)]
    X = ex.lhs(n, box, seed=3)
    for k, (lo, hi) in enumerate(box):
        counts, _ = np.histogram(X[:, k], bins=n, range=(lo, hi))
        assert np.all(counts == 1)
    np.testing.assert_array_equal(X, ex.lhs(n, box, seed=3))
    with pytest.raises(ValueError):
        ex.lhs(0, box)


def test_rrms():
    y = np.array([0.0, 1.0, 5.0])
    assert ex.rrms(y, y) == 0.0
    assert ex.rrms(y, np.full(3, y.mean())) == 1.0
    assert ex.rrms(np.array([0.0, 2.0]), np.array([1.0, 1.0])) == pytest.approx(1.0)
    assert ex.rrms(Dataset([[0.0], [1.0]], [0.0, 2.0]), [1.0, 1.0]) == pytest.approx(1.0)
    with pytest.raises(DegenerateTestSample):
        ex.rrms(np.ones(3), np.zeros(3))
    with pytest.raises(DimensionMismatch):
        ex.rrms(y, y[:2])


def test_cv_rrms():
    X = np.linspace(0, 1, 23)
    sample = Dataset(X, np.sin(5 * X))
    truth = lambda train, X_test, config: np.sin(5 * X_test[:, 0])  # noqa: E731
    mean, std, scores = ex.cv_rrms(sample, 5, truth)
    assert mean == 0.0 and std == 0.0 and len(scores) == 5
    sizes = []
    ex.cv_rrms(sample, 5, lambda tr, Xt, c: sizes.append(len(Xt)) or np.sin(5 * Xt[:, 0]))
    assert max(sizes) - min(sizes) <= 1 and sum(sizes) == 23
    a = ex.cv_rrms(sample, 4, config=FAST, seed=2)
    b = ex.cv_rrms(sample, 4, config=FAST, seed=2)
    assert a == b
    with pytest.raises(ValueError):
        ex.cv_rrms(sample, 1)


def test_toy_sample_nested():
    data = ex.toy_sample(6, 20, 4)
    assert (data.low.n, data.high.n) == (20, 6)
    np.testing.assert_array_equal(data.low.X[:6], data.high.X)
    np.testing.assert_allclose(data.high.y, ex.toy_high(data.high.X[:, 0]))


def test_highdim_sample_design():
    data = ex.highdim_sample(60, 20, "extrapolation", 1)
    assert (data.low.n, data.high.n, data.dim) == (60, 20, 6)
    np.testing.assert_array_equal(data.low.X[:20], data.high.X)
    assert data.low.X[:, 0].max() <= 0.5
    test = ex.highdim_test("extrapolation", 50, 1)
    assert test.X[:, 0].min() >= 0.5
    np.testing.assert_allclose(test.y, ex.rastrigin_high(test.X))
    again = ex.highdim_sample(60, 20, "extrapolation", 1)
    np.testing.assert_array_equal(data.low.y, again.low.y)
    # noisy training responses
    assert np.std(data.high.y - ex.rastrigin_high(data.high.X)) > 0


def test_plan_validation():
    with pytest.raises(ValueError):
        ExperimentPlan("toy", 10, 20)
    with pytest.raises(ValueError):
        ExperimentPlan("toy", 10, 5, seeds=())
    with pytest.raises(ValueError):
        ExperimentPlan("highdim", 10, 5, regime="sideways")


def test_toy_experiment_small():
    plan = ExperimentPlan("toy", 100, 15, seeds=(0, 1), config=FAST)
    report = ex.run_toy_experiment(plan)
    assert not report.failed
    assert report.seeds == [0, 1]
    gp_cell, vf_cell, bb_cell = (report.cell(m) for m in ("gp", "vfgp", "bbvfgp"))
    assert gp_cell["rrms_mean"] > vf_cell["rrms_mean"] > bb_cell["rrms_mean"]
    assert bb_cell["rrms_mean"] <= 1e-4
    assert "rrms_std" in gp_cell


def test_toy_experiment_is_deterministic():
    plan = ExperimentPlan("toy", 30, 6, seeds=(3,), config=FAST)
    a = ex.run_toy_experiment(plan).to_json(timings=False)
    b = ex.run_toy_experiment(plan).to_json(timings=False)
    assert a == b


def test_toy_rejects_unknown_method():
    plan = ExperimentPlan("toy", 30, 6, methods=("svfgp",), config=FAST)
    report = ex.run_toy_experiment(plan)
    assert report.failed and "svfgp" in report.records[0]["error"]


def test_report_single_seed_has_no_std():
    plan = ExperimentPlan("toy", 30, 6, methods=("gp",), seeds=(0,), config=FAST)
    report = ex.run_toy_experiment(plan)
    cell = report.cell("gp")
    assert "rrms_std" not in cell and "fit_time_std" not in cell
    assert cell["runs"] == 1 and cell["failures"] == 0


def test_report_round_trip_and_render():
    records = [
        {"method": m, "regime": "interpolation", "n_l": 100, "n_h": n_h, "seed": s,
         "rrms": 0.1 * (i + 1) + 0.01 * s, "fit_time": 1.0, "error": None}
        for i, m in enumerate(("gp", "vfgp")) for n_h in (6, 15) for s in (0, 1)
    ]
    records.append({"method": "bbvfgp", "regime": "interpolation", "n_l": 100, "n_h": 6, "seed": 0,
                    "rrms": None, "fit_time": None, "error": "OracleFailure: boom"})
    report = BenchmarkReport("toy", [], records)
    assert report.failed
    back = BenchmarkReport.from_dict(json.loads(report.to_json()))
    assert back.records == report.records
    assert report.cell("gp", n_h=6)["rrms_mean"] == pytest.approx(0.105)
    assert report.cell("bbvfgp")["failures"] == 1
    text = report.render()
    assert "n_h" in text and "gp" in text and "vfgp" in text
    assert "fit_time" not in json.dumps(report.to_dict(timings=False))


def test_highdim_render_blocks():
    records = [
        {"method": m, "regime": r, "n_l": n_l, "n_h": 100, "seed": 0, "rrms": 0.1, "fit_time": 2.0, "error": None}
        for m in ("vfgp", "svfgp") for r in ("interpolation", "extrapolation") for n_l in (1000, 3000)
    ]
    text = BenchmarkReport("highdim", [], records).render()
    assert "interpolation" in text and "extrapolation" in text and "Training time" in text


def test_highdim_small_full_base_svfgp_equals_vfgp():
    plan = ExperimentPlan("highdim", 120, 20, methods=("vfgp", "svfgp", "bbvfgp"), test_size=200,
                          config=FAST, n_base_low=120)
    report = ex.run_highdim_experiment(plan)
    assert not report.failed
    vf, sv = report.cell("vfgp")["rrms_mean"], report.cell("svfgp")["rrms_mean"]
    # the sparse model treats the low nugget of paired points as independent,
    # the only difference from the exact model on this nested design
    assert sv == pytest.approx(vf, rel=1e-2)
    assert report.cell("bbvfgp")["rrms_mean"] < vf
