"""
Command-line frontend: ``fit``, ``predict``, ``benchmark`` and ``diagnose``.

Datasets are CSV files with a header ``x1,...,xd,y``; low- and high-fidelity
samples live in separate files. Fitted models are stored as versioned JSON
artifacts that embed the training data, so a loaded artifact predicts
exactly like the model that was saved.

Exit status is 0 on success, 1 on a runtime failure (fit, oracle, failed
benchmark cells) and 2 on an input error (unreadable or malformed files,
inconsistent dimensions, bad flags).
"""

import argparse
import csv
import json
import sys
import time
from typing import Optional

import numpy as np

from . import __version__, bbvfgp, experiments, gp, svfgp, vfgp
from .errors import DimensionMismatch, ParseError, VfgprError
from .gp import AffineMap, Dataset, FitConfig, FitReport, GpModel
from .kernels import NoiseSpec, SeKernel
from .svfgp import BaseSelection, SvfgpModel
from .vfgp import VfDataset, VfgpModel, VfParams

ARTIFACT_SCHEMA = "vfgpr-model"
ARTIFACT_VERSION = 1
EXIT_OK, EXIT_FAILURE, EXIT_INPUT = 0, 1, 2


# -- CSV ---------------------------------------------------------------------

def read_csv(path, require_y: bool = True, dim: Optional[int] = None):
    """Read a ``x1..xd[,y]`` CSV file.

    Returns ``(X, y)``; `y` is None when the header has no ``y`` column.
    Raises ParseError with the 1-based line and column of the first problem.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError(f"{path}: file is empty", line=1, column=1)
    header = [h.strip() for h in rows[0]]
    has_y = bool(header) and header[-1] == "y"
    names = header[:-1] if has_y else header
    for j, name in enumerate(names):
        if name != f"x{j + 1}":
            raise ParseError(f"{path}: expected header x{j + 1}, found {name!r}", line=1, column=j + 1)
    if require_y and not has_y:
        raise ParseError(f"{path}: header must end with a y column", line=1, column=len(header))
    d = len(names)
    if d == 0:
        raise ParseError(f"{path}: header names no input columns", line=1, column=1)
    if dim is not None and d != dim:
        raise DimensionMismatch(f"{path}: {d} input columns, expected {dim}")
    values = []
    for i, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"{path}: expected {len(header)} fields, found {len(row)}",
                             line=i, column=min(len(row), len(header)) + 1)
        parsed = []
        for j, cell in enumerate(row, start=1):
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"{path}: not a number: {cell!r}", line=i, column=j) from None
            if not np.isfinite(v):
                raise ParseError(f"{path}: non-finite value {cell!r}", line=i, column=j)
            parsed.append(v)
        values.append(parsed)
    if not values:
        raise ParseError(f"{path}: no data rows", line=2, column=1)
    a = np.array(values)
    if has_y:
        return a[:, :d], a[:, d]
    return a, None


def write_csv(path_or_file, columns, header):
    """Write equal-length columns with 17 significant digits."""
    rows = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    own = isinstance(path_or_file, str)
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([format(v, ".17g") for v in r])
    finally:
        if own:
            fh.close()


def write_dataset(path, data: Dataset):
    header = [f"x{j + 1}" for j in range(data.dim)] + ["y"]
    write_csv(path, [data.X[:, j] for j in range(data.dim)] + [data.y], header)


def read_dataset(path, dim: Optional[int] = None) -> Dataset:
    X, y = read_csv(path, require_y=True, dim=dim)
    return Dataset(X, y)


# -- artifacts ---------------------------------------------------------------

def _map_dict(m: AffineMap) -> dict:
    return {"x_offset": m.x_offset.tolist(), "x_scale": m.x_scale.tolist(),
            "y_offset": m.y_offset, "y_scale": m.y_scale}


def _map_load(d) -> AffineMap:
    return AffineMap(d["x_offset"], d["x_scale"], d["y_offset"], d["y_scale"])


def _kernel_dict(k: SeKernel) -> dict:
    return {"output_scale": k.output_scale, "length_weights": k.length_weights.tolist()}


def _kernel_load(d) -> SeKernel:
    return SeKernel(d["output_scale"], d["length_weights"])


def _data_dict(data: Dataset) -> dict:
    return {"X": data.X.tolist(), "y": data.y.tolist()}


def _data_load(d) -> Dataset:
    return Dataset(np.array(d["X"], dtype=float), np.array(d["y"], dtype=float))


def _params_dict(p: VfParams) -> dict:
    return {"kernel_low": _kernel_dict(p.kernel_low), "noise_low": p.noise_low.variance,
            "kernel_diff": _kernel_dict(p.kernel_diff), "noise_diff": p.noise_diff.variance,
            "rho": p.rho}


def _params_load(d) -> VfParams:
    return VfParams(_kernel_load(d["kernel_low"]), NoiseSpec(d["noise_low"]),
                    _kernel_load(d["kernel_diff"]), NoiseSpec(d["noise_diff"]), d["rho"])


def _report(r: Optional[FitReport]):
    return None if r is None else r.as_dict()


def _report_load(d):
    return None if d is None else FitReport.from_dict(d)


def model_to_dict(model) -> dict:
    """Structured form of a fitted GP, VFGP or SVFGP model."""
    out = {"schema": ARTIFACT_SCHEMA, "schema_version": ARTIFACT_VERSION, "library_version": __version__}
    if isinstance(model, GpModel):
        out.update(kind="gp", kernel=_kernel_dict(model.kernel), noise=model.noise.variance,
                   transform=_map_dict(model.transform), training=_data_dict(model.training),
                   fit_report=_report(model.fit_report))
    elif isinstance(model, VfgpModel):
        out.update(kind="vfgp", params=_params_dict(model.params),
                   low_map=_map_dict(model.low_map), high_map=_map_dict(model.high_map),
                   training={"low": _data_dict(model.training.low), "high": _data_dict(model.training.high)},
                   fit_report={"low": _report(model.fit_report_low), "diff": _report(model.fit_report_diff)})
    elif isinstance(model, SvfgpModel):
        b = model.base_model
        out.update(kind="svfgp", params=_params_dict(model.params),
                   low_map=_map_dict(model.low_map), high_map=_map_dict(model.high_map),
                   training={"low": _data_dict(model.training.low), "high": _data_dict(model.training.high)},
                   base={"low": model.base.low_indices.tolist(), "high": model.base.high_indices.tolist(),
                         "seed": model.base.seed},
                   fit_report=None if b is None else
                   {"low": _report(b.fit_report_low), "diff": _report(b.fit_report_diff)})
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    return out


def model_from_dict(d: dict):
    """Rebuild a model saved by :func:`model_to_dict`."""
    if d.get("schema") != ARTIFACT_SCHEMA:
        raise ParseError("not a model artifact (schema field missing or wrong)")
    if d.get("schema_version") != ARTIFACT_VERSION:
        raise ParseError(f"unsupported artifact version {d.get('schema_version')!r}")
    kind = d.get("kind")
    try:
        if kind == "gp":
            return GpModel.from_params(_kernel_load(d["kernel"]), NoiseSpec(d["noise"]),
                                       _data_load(d["training"]), _map_load(d["transform"]),
                                       _report_load(d.get("fit_report")))
        training = VfDataset(_data_load(d["training"]["low"]), _data_load(d["training"]["high"]))
        params = _params_load(d["params"])
        low_map, high_map = _map_load(d["low_map"]), _map_load(d["high_map"])
        reports = d.get("fit_report") or {}
        if kind == "vfgp":
            return VfgpModel.from_params(params, training, low_map, high_map,
                                         _report_load(reports.get("low")), _report_load(reports.get("diff")))
        if kind == "svfgp":
            base = BaseSelection(d["base"]["low"], d["base"]["high"], d["base"].get("seed"))
            return SvfgpModel.from_params(params, training, base, low_map, high_map)
    except (KeyError, TypeError) as exc:
        raise ParseError(f"artifact is missing or has a malformed field: {exc}") from None
    raise ParseError(f"unknown model kind {kind!r}")


def save_model(model, path):
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, indent=1)
        fh.write("\n")


def load_model(path):
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc.msg}", line=exc.lineno, column=exc.colno) from None
    return model_from_dict(d)


# -- oracles -----------------------------------------------------------------

def make_oracle(binding: str):
    """``builtin:<name>`` or ``exec:<path>``; returns a callable (closable for exec)."""
    kind, _, target = binding.partition(":")
    if kind == "builtin":
        if target not in experiments.BUILTIN_ORACLES:
            names = ", ".join(sorted(experiments.BUILTIN_ORACLES))
            raise ValueError(f"unknown builtin oracle {target!r} (choose from {names})")
        return experiments.BUILTIN_ORACLES[target]
    if kind == "exec" and target:
        return bbvfgp.ProcessOracle([target])
    raise ValueError(f"oracle must be builtin:<name> or exec:<path>, got {binding!r}")


# -- commands ----------------------------------------------------------------

def _config(args) -> FitConfig:
    return FitConfig(restarts=args.restarts, max_iter=args.max_iter, seed=args.seed,
                     nugget_floor=args.nugget_floor)


def _print_fields(fields, out=None):
    out = sys.stdout if out is None else out
    for k, v in fields:
        print(f"{k}: {v}", file=out)


def cmd_fit(args) -> int:
    config = _config(args)
    method = args.method
    if method == "gp":
        path = args.high or args.low
        if path is None:
            raise _InputError("gp needs --high (or --low)")
        data = read_dataset(path)
        t0 = time.perf_counter()
        model = gp.fit(data, config)
        elapsed = time.perf_counter() - t0
        reports = [("", model.fit_report)]
        summary = [("method", "gp"), ("n", data.n), ("dim", data.dim)]
    else:
        if args.low is None or args.high is None:
            raise _InputError(f"{method} needs both --low and --high")
        low = read_dataset(args.low)
        high = read_dataset(args.high, dim=low.dim)
        data = VfDataset(low, high)
        t0 = time.perf_counter()
        if method == "svfgp":
            n1_l = data.low.n if args.n_base_low is None else args.n_base_low
            n1_h = data.high.n if args.n_base_high is None else args.n_base_high
            model = svfgp.fit(data, n1_l, n1_h, config, seed=args.seed)
            fitted = model.base_model
        else:
            # the blackbox variant stores the plain co-kriging model; the oracle binds at predict time
            model = vfgp.fit(data, config)
            fitted = model
        elapsed = time.perf_counter() - t0
        reports = [("low_", fitted.fit_report_low), ("diff_", fitted.fit_report_diff)]
        summary = [("method", method), ("n_low", low.n), ("n_high", high.n), ("dim", low.dim),
                   ("rho", repr(model.params.rho))]
        if method == "svfgp":
            summary.append(("n_base", model.base.size))
    for prefix, r in reports:
        summary += [(f"{prefix}log_likelihood", repr(r.log_likelihood)),
                    (f"{prefix}penalized", repr(r.penalized)),
                    (f"{prefix}restarts", r.restarts_used),
                    (f"{prefix}restarts_failed", r.restarts_failed)]
    summary.append(("fit_seconds", f"{elapsed:.3f}"))
    if args.out:
        save_model(model, args.out)
        summary.append(("artifact", args.out))
    _print_fields(summary)
    return EXIT_OK


def cmd_predict(args) -> int:
    model = load_model(args.artifact)
    X, _ = read_csv(args.query, require_y=False, dim=model.dim)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        if args.oracle:
            if not isinstance(model, VfgpModel):
                raise _InputError("an oracle needs a vfgp artifact")
            oracle = make_oracle(args.oracle)
            try:
                bb = bbvfgp.BbVfgpModel(model, oracle)
                mean, var, values, _ = bb.predict_batch(X)
            finally:
                if hasattr(oracle, "close"):
                    oracle.close()
            write_csv(out, [mean, var, values], ["mean", "variance", "oracle_value"])
        else:
            if isinstance(model, SvfgpModel):
                mean, var = model.predict(X)
            else:
                mean, var = model.predict(X, full_cov=False)
            write_csv(out, [mean, var], ["mean", "variance"])
    finally:
        if args.out:
            out.close()
    return EXIT_OK


def cmd_benchmark(args) -> int:
    config = _config(args)
    seeds = tuple(range(args.seed, args.seed + args.seeds))
    if args.suite == "toy":
        n_h = tuple(args.n_h) if args.n_h else (6, 15, 30)
        methods = tuple(args.methods) if args.methods else ("gp", "vfgp", "bbvfgp")
        report = experiments.run_toy_suite(n_h, seeds, config, methods)
    else:
        n_l = tuple(args.n_l) if args.n_l else (1000, 3000)
        n_h = args.n_h[0] if args.n_h else 100
        regimes = (args.regime,) if args.regime else ("interpolation", "extrapolation")
        methods = tuple(args.methods) if args.methods else ("vfgp", "svfgp", "bbvfgp")
        n_base_low = 1000 if args.n_base_low is None else args.n_base_low
        report = experiments.run_highdim_suite(n_l, n_h, seeds, regimes, config, methods, n_base_low)
    print(report.render())
    for r in report.records:
        if r["error"]:
            print(f"failed: {r['method']} seed {r['seed']} n_l {r['n_l']} n_h {r['n_h']}: {r['error']}",
                  file=sys.stderr)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(report.to_json())
            fh.write("\n")
    return EXIT_FAILURE if report.failed else EXIT_OK


def cmd_diagnose(args) -> int:
    model = load_model(args.artifact)
    if not isinstance(model, SvfgpModel):
        raise _InputError("diagnose needs an svfgp artifact")
    if args.query:
        X, _ = read_csv(args.query, require_y=False, dim=model.dim)
    else:
        lo = np.vstack([model.training.low.X, model.training.high.X]).min(axis=0)
        hi = np.vstack([model.training.low.X, model.training.high.X]).max(axis=0)
        X = experiments.lhs(args.probe_size, np.column_stack([lo, hi]), args.seed)
    err_cross, err_self = svfgp.nystrom_diagnostic(model, X)
    _print_fields([("n_base", model.base.size), ("n_probe", X.shape[0]),
                   ("cross_error", repr(err_cross)), ("self_error", repr(err_self))])
    return EXIT_OK


class _InputError(ValueError):
    """Bad combination of flags or files."""


def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vfgpr", description="Variable-fidelity Gaussian process surrogates.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for every random choice (default 0)")
    common.add_argument("--restarts", type=_positive_int, default=5, help="optimizer starts (default 5)")
    common.add_argument("--max-iter", type=_positive_int, default=200, help="iterations per start")
    common.add_argument("--nugget-floor", type=float, default=None,
                        help="lower limit on noise variance, standardized units")
    common.add_argument("--out", help="output file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", parents=[common], help="fit a model and write an artifact")
    p.add_argument("--method", choices=("gp", "vfgp", "svfgp", "bbvfgp"), default="vfgp")
    p.add_argument("--low", help="low-fidelity CSV")
    p.add_argument("--high", help="high-fidelity CSV")
    p.add_argument("--n-base-low", type=_positive_int, help="svfgp low-fidelity base points (default all)")
    p.add_argument("--n-base-high", type=_positive_int, help="svfgp high-fidelity base points (default all)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", parents=[common], help="predict at query points")
    p.add_argument("artifact")
    p.add_argument("--query", required=True, help="CSV with header x1..xd (a y column is ignored)")
    p.add_argument("--oracle", help="builtin:<name> or exec:<path>; enables blackbox prediction")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("benchmark", parents=[common], help="run a benchmark suite")
    p.add_argument("suite", choices=("toy", "highdim"))
    p.add_argument("--seeds", type=_positive_int, default=None,
                   help="number of seeds starting at --seed (default 50 toy, 3 highdim)")
    p.add_argument("--n-l", type=_positive_int, nargs="+", help="highdim low-fidelity sizes")
    p.add_argument("--n-h", type=_positive_int, nargs="+", help="high-fidelity sizes")
    p.add_argument("--regime", choices=("interpolation", "extrapolation"))
    p.add_argument("--methods", nargs="+", choices=("gp", "vfgp", "svfgp", "bbvfgp"))
    p.add_argument("--n-base-low", type=_positive_int, help="svfgp low-fidelity base points (default 1000)")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("diagnose", parents=[common], help="Nystrom approximation error of an svfgp artifact")
    p.add_argument("artifact")
    p.add_argument("--query", help="probe CSV (default: Latin hypercube over the data box)")
    p.add_argument("--probe-size", type=_positive_int, default=200)
    p.set_defaults(func=cmd_diagnose)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "benchmark" and args.seeds is None:
        args.seeds = 50 if args.suite == "toy" else 3
    try:
        return args.func(args)
    except (ParseError, DimensionMismatch, _InputError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except VfgprError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except (ArithmeticError, RuntimeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
