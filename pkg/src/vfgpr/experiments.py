"""
Benchmark problems, sampling designs, accuracy metrics and experiment runners.

Two analytic problems are provided: the one-dimensional Forrester pair and
a noisy six-dimensional Rastrigin-type pair. The runners measure the
accuracy (RRMS) and training-time comparisons between GP, VFGP, SVFGP and
BB VFGP.
"""

import json
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import qmc

from . import __version__, bbvfgp, gp, svfgp, vfgp
from .errors import DegenerateTestSample, DimensionMismatch
from .gp import Dataset, FitConfig
from .vfgp import VfDataset

HIGH_NOISE_VAR = 0.001
LOW_NOISE_VAR = 0.002


# -- test functions ---------------------------------------------------------

def toy_high(x):
    """Forrester function ``(6x - 2)^2 sin(12x - 4)``."""
    x = np.asarray(x, dtype=float)
    return (6.0 * x - 2.0) ** 2 * np.sin(12.0 * x - 4.0)


def toy_low(x):
    """Cheap Forrester approximation ``0.5 toy_high(x) + 10 (x - 1)``."""
    x = np.asarray(x, dtype=float)
    return 0.5 * toy_high(x) + 10.0 * (x - 1.0)


def _rows(x, dim):
    x = np.asarray(x, dtype=float)
    return x.reshape(-1, dim) if x.ndim < 2 else x


def rastrigin_high(x, rng: Optional[np.random.Generator] = None):
    """``20 + sum(x_i^2 - 10 cos(2 pi x_i))`` plus N(0, 0.001) noise when `rng` is given.

    `x` is one point of length 6 or an (n, 6) array.
    """
    xa = np.asarray(x, dtype=float)
    X = _rows(xa, xa.shape[-1])
    val = 20.0 + np.sum(X ** 2 - 10.0 * np.cos(2.0 * np.pi * X), axis=1)
    if rng is not None:
        val = val + rng.normal(0.0, np.sqrt(HIGH_NOISE_VAR), size=val.shape)
    return val[0] if xa.ndim == 1 else val


def rastrigin_low(x, rng: Optional[np.random.Generator] = None):
    """``rastrigin_high + 0.2 sum (x_i + 1)^2`` plus N(0, 0.002) noise when `rng` is given.

    The high-fidelity part is taken noise-free so the only noise is the
    low-fidelity term.
    """
    xa = np.asarray(x, dtype=float)
    X = _rows(xa, xa.shape[-1])
    val = rastrigin_high(X) + 0.2 * np.sum((X + 1.0) ** 2, axis=1)
    if rng is not None:
        val = val + rng.normal(0.0, np.sqrt(LOW_NOISE_VAR), size=val.shape)
    return val[0] if xa.ndim == 1 else val


@dataclass(frozen=True)
class TestProblem:
    """Paired high/low fidelity functions over a box."""

    __test__ = False

    name: str
    dim: int
    box: Tuple[Tuple[float, float], ...]
    high: Callable
    low: Callable
    high_noise: float = 0.0
    low_noise: float = 0.0


TOY = TestProblem("toy", 1, ((0.0, 1.0),), toy_high, toy_low)
RASTRIGIN = TestProblem("highdim", 6, ((0.0, 1.0),) * 6, rastrigin_high, rastrigin_low,
                        HIGH_NOISE_VAR, LOW_NOISE_VAR)

BUILTIN_ORACLES = {
    "toy_low": lambda x: float(toy_low(np.ravel(x)[0])),
    "rastrigin_low": lambda x: float(rastrigin_low(np.ravel(x))),
}


# -- designs and metrics ----------------------------------------------------

def lhs(n: int, box, seed=None) -> np.ndarray:
    """Latin hypercube sample of `n` points in `box` (sequence of (low, high) pairs).

    Each dimension is cut into `n` equal strata holding exactly one point.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    box = np.asarray(box, dtype=float).reshape(-1, 2)
    u = qmc.LatinHypercube(d=box.shape[0], seed=seed).random(n)
    return box[:, 0] + u * (box[:, 1] - box[:, 0])


def rrms(test: Union[Dataset, np.ndarray], predictions) -> float:
    """Relative root mean square error.

    ``sqrt(sum (y_hat - y)^2 / sum (mean(y) - y)^2)``; `test` is a Dataset
    or the vector of true responses.
    """
    y = test.y if isinstance(test, Dataset) else np.asarray(test, dtype=float).ravel()
    y_hat = np.asarray(predictions, dtype=float).ravel()
    if y.size != y_hat.size:
        raise DimensionMismatch(f"{y.size} test values but {y_hat.size} predictions")
    denom = float(np.sum((y - y.mean()) ** 2))
    if denom == 0.0:
        raise DegenerateTestSample("test responses are all identical")
    return float(np.sqrt(np.sum((y_hat - y) ** 2) / denom))


def _gp_method(train: Dataset, X_test, config: FitConfig):
    return gp.fit(train, config).predict(X_test, full_cov=False)[0]


def cv_rrms(sample: Dataset, folds: int, method="gp", config: FitConfig = FitConfig(),
            seed: int = 0):
    """K-fold cross-validated RRMS.

    `method` is ``"gp"`` or a callable ``(train, X_test, config) -> predictions``.
    Returns ``(mean, std, per_fold)``.
    """
    if folds < 2 or sample.n < folds:
        raise ValueError(f"need 2 <= folds <= sample size, got folds={folds}, n={sample.n}")
    fn = _gp_method if method == "gp" else method
    order = np.random.default_rng(seed).permutation(sample.n)
    scores = []
    for test_idx in np.array_split(order, folds):
        train_idx = np.setdiff1d(order, test_idx, assume_unique=True)
        test = sample.subset(test_idx)
        scores.append(rrms(test, fn(sample.subset(train_idx), test.X, config)))
    scores = np.asarray(scores)
    return float(scores.mean()), float(scores.std(ddof=1)), scores.tolist()


# -- reports -----------------------------------------------------------------

@dataclass
class BenchmarkReport:
    """Per-cell records of an experiment run plus aggregate statistics.

    Each record has keys ``method, regime, n_l, n_h, seed, rrms, fit_time,
    error``. Aggregates are recomputed from the records on demand.
    """

    suite: str
    plans: List[dict] = field(default_factory=list)
    records: List[dict] = field(default_factory=list)
    version: str = __version__

    @property
    def seeds(self) -> List[int]:
        return sorted({r["seed"] for r in self.records})

    @property
    def failed(self) -> bool:
        return any(r["error"] for r in self.records)

    def merge(self, other: "BenchmarkReport") -> "BenchmarkReport":
        return BenchmarkReport(self.suite, self.plans + other.plans, self.records + other.records,
                               self.version)

    def aggregate(self) -> List[dict]:
        """Mean (and std when more than one seed) of RRMS and fit time per cell."""
        groups: Dict[tuple, List[dict]] = {}
        for r in self.records:
            groups.setdefault((r["method"], r["regime"], r["n_l"], r["n_h"]), []).append(r)
        out = []
        for (method, regime, n_l, n_h), rs in groups.items():
            ok = [r for r in rs if r["error"] is None]
            row = {"method": method, "regime": regime, "n_l": n_l, "n_h": n_h,
                   "runs": len(ok), "failures": len(rs) - len(ok)}
            for key in ("rrms", "fit_time"):
                vals = np.array([r[key] for r in ok if r[key] is not None], dtype=float)
                row[f"{key}_mean"] = float(vals.mean()) if vals.size else None
                if vals.size > 1:
                    row[f"{key}_std"] = float(vals.std(ddof=1))
            out.append(row)
        return out

    def cell(self, method, regime=None, n_l=None, n_h=None) -> dict:
        for row in self.aggregate():
            if (row["method"] == method and (regime is None or row["regime"] == regime)
                    and (n_l is None or row["n_l"] == n_l) and (n_h is None or row["n_h"] == n_h)):
                return row
        raise KeyError((method, regime, n_l, n_h))

    def to_dict(self, timings: bool = True) -> dict:
        records = self.records if timings else [
            {k: v for k, v in r.items() if k != "fit_time"} for r in self.records
        ]
        agg = self.aggregate()
        if not timings:
            agg = [{k: v for k, v in a.items() if not k.startswith("fit_time")} for a in agg]
        return {"suite": self.suite, "version": self.version, "seeds": self.seeds,
                "plans": self.plans, "records": records, "aggregate": agg}

    def to_json(self, timings: bool = True) -> str:
        return json.dumps(self.to_dict(timings), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "BenchmarkReport":
        return cls(d["suite"], d.get("plans", []), d["records"], d.get("version", __version__))

    def render(self) -> str:
        """Plain-text tables: methods by row, sample sizes by column."""
        agg = self.aggregate()
        methods = []
        for a in agg:
            if a["method"] not in methods:
                methods.append(a["method"])
        if self.suite == "toy":
            cols = sorted({a["n_h"] for a in agg})
            return _table("RRMS errors, toy problem", "n_h", cols, methods,
                          lambda m, c: _get(agg, m, n_h=c, key="rrms"))
        cols = sorted({a["n_l"] for a in agg})
        blocks = []
        for regime in ("interpolation", "extrapolation"):
            if any(a["regime"] == regime for a in agg):
                blocks.append(_table(f"RRMS errors, {regime} regime", "n_l", cols, methods,
                                     lambda m, c, r=regime: _get(agg, m, regime=r, n_l=c, key="rrms")))
        regime = "interpolation" if any(a["regime"] == "interpolation" for a in agg) else "extrapolation"
        blocks.append(_table("Training time, seconds", "n_l", cols, methods,
                             lambda m, c: _get(agg, m, regime=regime, n_l=c, key="fit_time")))
        return "\n\n".join(blocks)


def _get(agg, method, key, **match):
    for a in agg:
        if a["method"] == method and all(a[k] == v for k, v in match.items()):
            return a.get(f"{key}_mean"), a.get(f"{key}_std")
    return None, None


def _table(title, col_name, cols, methods, getter) -> str:
    width = 22
    lines = [title, f"{col_name:<10}" + "".join(f"{c:>{width}}" for c in cols)]
    lines.append("-" * len(lines[-1]))
    for m in methods:
        cells = []
        for c in cols:
            mean, std = getter(m, c)
            if mean is None:
                cells.append(f"{'-':>{width}}")
            elif std is None:
                cells.append(f"{mean:>{width}.4g}")
            else:
                cells.append(f"{f'{mean:.4g} +- {std:.2g}':>{width}}")
        lines.append(f"{m:<10}" + "".join(cells))
    return "\n".join(lines)


# -- experiment plans --------------------------------------------------------

@dataclass(frozen=True)
class ExperimentPlan:
    """One experiment cell specification.

    For the toy problem `n_l` is the total low-fidelity sample size (the
    high-fidelity points plus extra uniform points). For the high-dimensional
    problem `regime` selects the full box or the half-range restriction on
    the first input.
    """

    problem: str
    n_l: int
    n_h: int
    regime: str = "interpolation"
    methods: Tuple[str, ...] = ("gp", "vfgp", "bbvfgp")
    seeds: Tuple[int, ...] = (0,)
    test_size: int = 1000
    config: FitConfig = FitConfig()
    n_base_low: int = 1000
    n_base_high: Optional[int] = None

    def __post_init__(self):
        if self.n_h > self.n_l:
            raise ValueError("n_h must not exceed n_l")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.regime not in ("interpolation", "extrapolation"):
            raise ValueError(f"unknown regime {self.regime!r}")

    def echo(self) -> dict:
        d = asdict(self)
        d["methods"] = list(self.methods)
        d["seeds"] = list(self.seeds)
        return d


def _record(plan, method, seed, rrms_value=None, fit_time=None, error=None):
    return {"method": method, "regime": plan.regime, "n_l": plan.n_l, "n_h": plan.n_h,
            "seed": int(seed), "rrms": rrms_value, "fit_time": fit_time, "error": error}


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


_warmed = False


def _warm_up():
    global _warmed
    if not _warmed:
        x = np.linspace(0.0, 1.0, 8)
        vfgp.fit(VfDataset(Dataset(x, toy_low(x)), Dataset(x[::2], toy_high(x[::2]))),
                 FitConfig(restarts=1, max_iter=5))
        _warmed = True


def toy_sample(n_h: int, n_l: int, seed: int) -> VfDataset:
    """Nested uniform design: high points plus ``n_l - n_h`` extra low points."""
    rng = np.random.default_rng(seed)
    x_h = rng.uniform(0.0, 1.0, n_h)
    x_l = np.concatenate([x_h, rng.uniform(0.0, 1.0, n_l - n_h)])
    return VfDataset(Dataset(x_l, toy_low(x_l)), Dataset(x_h, toy_high(x_h)))


def run_toy_experiment(plan: ExperimentPlan) -> BenchmarkReport:
    """Forrester benchmark: fit each method per seed, RRMS on 1000 grid points."""
    if plan.problem != "toy":
        raise ValueError(f"plan is for problem {plan.problem!r}, not 'toy'")
    _warm_up()
    x_test = np.linspace(0.0, 1.0, plan.test_size)
    test = Dataset(x_test, toy_high(x_test))
    report = BenchmarkReport("toy", [plan.echo()])
    for seed in plan.seeds:
        data = toy_sample(plan.n_h, plan.n_l, seed)
        config = FitConfig(plan.config.restarts, plan.config.max_iter, int(seed), plan.config.nugget_floor)
        vf_model, vf_time, vf_error = None, None, None
        for method in plan.methods:
            try:
                if method == "gp":
                    model, t = _timed(lambda: gp.fit(data.high, config))
                    pred = model.predict(test.X, full_cov=False)[0]
                elif method in ("vfgp", "bbvfgp"):
                    if vf_model is None and vf_error is None:
                        try:
                            vf_model, vf_time = _timed(lambda: vfgp.fit(data, config))
                        except Exception as exc:  # recorded per cell
                            vf_error = f"{type(exc).__name__}: {exc}"
                    if vf_error is not None:
                        raise RuntimeError(vf_error)
                    if method == "vfgp":
                        t = vf_time
                        pred = vf_model.predict(test.X, full_cov=False)[0]
                    else:
                        bb, t_inv = _timed(lambda: bbvfgp.BbVfgpModel(vf_model, BUILTIN_ORACLES["toy_low"]))
                        t = vf_time + t_inv
                        pred = bb.predict_batch(test.X)[0]
                else:
                    raise ValueError(f"method {method!r} is not run on the toy problem")
                report.records.append(_record(plan, method, seed, rrms(test, pred), t))
            except Exception as exc:
                report.records.append(_record(plan, method, seed, error=f"{type(exc).__name__}: {exc}"))
    return report


def highdim_sample(n_l: int, n_h: int, regime: str, seed: int) -> VfDataset:
    """Nested Latin hypercube design with noisy responses.

    The high-fidelity inputs are a Latin hypercube of size `n_h`; the low
    sample reuses them and adds a second Latin hypercube of ``n_l - n_h``
    points, mirroring the nested toy design.
    """
    box = np.array(RASTRIGIN.box)
    if regime == "extrapolation":
        box[0] = (0.0, 0.5)
    ss = np.random.SeedSequence([seed, 0 if regime == "interpolation" else 1])
    s_low, s_high, s_noise = ss.spawn(3)
    X_h = lhs(n_h, box, np.random.default_rng(s_high))
    X_l = X_h if n_l == n_h else np.vstack([X_h, lhs(n_l - n_h, box, np.random.default_rng(s_low))])
    noise = np.random.default_rng(s_noise)
    return VfDataset(Dataset(X_l, rastrigin_low(X_l, noise)), Dataset(X_h, rastrigin_high(X_h, noise)))


def highdim_test(regime: str, size: int, seed: int) -> Dataset:
    """Noise-free test sample; extrapolation tests put the first input in [0.5, 1]."""
    box = np.array(RASTRIGIN.box)
    if regime == "extrapolation":
        box[0] = (0.5, 1.0)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2, 0 if regime == "interpolation" else 1]))
    X = lhs(size, box, rng)
    return Dataset(X, rastrigin_high(X))


def run_highdim_experiment(plan: ExperimentPlan) -> BenchmarkReport:
    """Six-dimensional benchmark for VFGP, SVFGP and BB VFGP at one `n_l` and regime.

    Records fit wall-clock time (BB VFGP: the VFGP fit plus the inverse
    factor). Noise corrupts the training samples only: the blackbox returns
    the noise-free low-fidelity function, like the noise-free test values. SVFGP uses ``min(n_base_low, n_l)`` low and ``n_base_high``
    (default all) high base points.
    """
    if plan.problem != "highdim":
        raise ValueError(f"plan is for problem {plan.problem!r}, not 'highdim'")
    _warm_up()
    report = BenchmarkReport("highdim", [plan.echo()])
    for seed in plan.seeds:
        data = highdim_sample(plan.n_l, plan.n_h, plan.regime, seed)
        test = highdim_test(plan.regime, plan.test_size, seed)
        config = FitConfig(plan.config.restarts, plan.config.max_iter, int(seed), plan.config.nugget_floor)
        vf_model, vf_time, vf_error = None, None, None
        for method in plan.methods:
            try:
                if method in ("vfgp", "bbvfgp"):
                    if vf_model is None and vf_error is None:
                        try:
                            vf_model, vf_time = _timed(lambda: vfgp.fit(data, config))
                        except Exception as exc:
                            vf_error = f"{type(exc).__name__}: {exc}"
                    if vf_error is not None:
                        raise RuntimeError(vf_error)
                    if method == "vfgp":
                        t = vf_time
                        pred = vf_model.predict(test.X, full_cov=False)[0]
                    else:
                        bb, t_inv = _timed(lambda: bbvfgp.BbVfgpModel(vf_model, BUILTIN_ORACLES["rastrigin_low"]))
                        t = vf_time + t_inv
                        pred = bb.predict_batch(test.X)[0]
                elif method == "svfgp":
                    n1_l = min(plan.n_base_low, plan.n_l)
                    n1_h = plan.n_h if plan.n_base_high is None else min(plan.n_base_high, plan.n_h)
                    model, t = _timed(lambda: svfgp.fit(data, n1_l, n1_h, config))
                    pred = model.predict(test.X)[0]
                elif method == "gp":
                    model, t = _timed(lambda: gp.fit(data.high, config))
                    pred = model.predict(test.X, full_cov=False)[0]
                else:
                    raise ValueError(f"unknown method {method!r}")
                report.records.append(_record(plan, method, seed, rrms(test, pred), t))
            except Exception as exc:
                report.records.append(_record(plan, method, seed, error=f"{type(exc).__name__}: {exc}"))
    return report


def run_toy_suite(n_h_values=(6, 15, 30), seeds=tuple(range(50)), config: FitConfig = FitConfig(),
                  methods=("gp", "vfgp", "bbvfgp")) -> BenchmarkReport:
    report = BenchmarkReport("toy")
    for n_h in n_h_values:
        plan = ExperimentPlan("toy", 100, n_h, methods=tuple(methods), seeds=tuple(seeds), config=config)
        report = report.merge(run_toy_experiment(plan))
    return report


def run_highdim_suite(n_l_values=(1000, 3000), n_h: int = 100, seeds=(0, 1, 2),
                      regimes=("interpolation", "extrapolation"), config: FitConfig = FitConfig(),
                      methods=("vfgp", "svfgp", "bbvfgp"), n_base_low: int = 1000,
                      test_size: int = 1000) -> BenchmarkReport:
    report = BenchmarkReport("highdim")
    for n_l in n_l_values:
        for regime in regimes:
            plan = ExperimentPlan("highdim", n_l, n_h, regime, tuple(methods), tuple(seeds),
                                  test_size, config, n_base_low)
            report = report.merge(run_highdim_experiment(plan))
    return report
