"""Command line interface: ``panelse estimate | simulate | cv``.

Exit status is 0 on success, 1 on a computational or input-data error and
2 on a usage error.  ``--config FILE`` supplies a JSON object of option
values (keys as the long flag names, dashes or underscores); explicit
flags override it.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
import warnings
from pathlib import Path

from .covariance import normalize_estimator
from .estimator import estimate_covariance
from .exceptions import InvalidConfig, NonPositiveVariance, PanelSEError
from .inference import format_table, sandwich_variance, test_and_ci
from .mc import DgpSpec, ExperimentGrid, run_experiment
from .ols import fit_ols
from .panel_data import load_csv, within_transform
from .tuning import CvConfig, cross_validate_m

SEED_ENV = "PANEL_SE_SEED"

COMMON_DEFAULTS = {"output": "-", "config": None}
DATA_DEFAULTS = {
    "input": None,
    "unit_col": "unit",
    "time_col": "time",
    "y_col": "y",
    "x_cols": None,
    "no_fe": False,
    "bandwidth": "auto",
}
DEFAULTS = {
    "estimate": {
        **COMMON_DEFAULTS,
        **DATA_DEFAULTS,
        "estimators": "white,cx,ct,hac,dk,hard",
        "threshold": "cv",
        "level": 0.05,
        "null": "0",
        "m0": 1.0,
        "folds": None,
        "psd_floor": False,
        "format": "text",
    },
    "simulate": {
        **COMMON_DEFAULTS,
        "case": 1,
        "n": 50,
        "t": 100,
        "beta0": 1.0,
        "rho_x": 0.3,
        "gamma_x": 1.0,
        "rho": 0.0,
        "gamma": 0.0,
        "psi": 0.5,
        "r": 2,
        "rho_f": 0.9,
        "rho_lambda": 0.3,
        "burn_in": 100,
        "lattice": "rook",
        "bandwidths": "3,7,11",
        "thresholds": "0.10,0.15,0.20,0.25",
        "estimators": "hard,hac,dk,cx,ct,white",
        "reps": 1000,
        "level": 0.05,
        "seed": None,
        "threads": 1,
        "format": "csv",
    },
    "cv": {
        **COMMON_DEFAULTS,
        **DATA_DEFAULTS,
        "mode": "hard",
        "folds": None,
        "m0": 1.0,
        "grid": None,
        "grid_size": 100,
        "format": "json",
    },
}


class UsageError(Exception):
    pass


def _add(p, cmd, flag, help, **kw):
    dest = flag.lstrip("-").replace("-", "_")
    default = DEFAULTS[cmd][dest]
    shown = "none" if default is None else default
    if dest == "seed":
        shown = f"${SEED_ENV} or 0"
    p.add_argument(flag, dest=dest, default=None, help=f"{help} (default: {shown})", **kw)


def _data_args(p, cmd):
    _add(p, cmd, "--input", "long-format CSV with columns unit,time,y,x1..xk", metavar="PATH")
    _add(p, cmd, "--unit-col", "unit identifier column")
    _add(p, cmd, "--time-col", "period column (integers or ISO dates)")
    _add(p, cmd, "--y-col", "outcome column")
    _add(p, cmd, "--x-cols", "comma-separated regressor columns; all others if omitted")
    _add(p, cmd, "--no-fe", "skip the two-way within transform", action="store_true")
    _add(p, cmd, "--bandwidth", "Bartlett bandwidth L, integer or 'auto' = floor(4(T/100)^(2/9))")


def _common_args(p, cmd, formats):
    _add(p, cmd, "--output", "output file, '-' for stdout", metavar="PATH")
    _add(p, cmd, "--format", "output format", choices=formats)
    p.add_argument("--config", default=None, metavar="FILE",
                   help="JSON file of option values; flags override it")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="panelse",
        description="Panel OLS standard errors robust to serial and cross-sectional "
                    "correlation with unknown clusters.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="fit a two-way FE panel and report standard errors")
    _data_args(p, "estimate")
    _add(p, "estimate", "--estimators", "comma list from white,cx,ct,hac,dk,hard,soft")
    _add(p, "estimate", "--threshold", "threshold constant M for hard/soft, or 'cv'")
    _add(p, "estimate", "--level", "significance level of the two-sided tests", type=float)
    _add(p, "estimate", "--null", "null value(s), one or one per regressor, comma-separated")
    _add(p, "estimate", "--m0", "upper end of the cross-validation grid", type=float)
    _add(p, "estimate", "--folds", "number of validation blocks; round(log T) if omitted", type=int)
    _add(p, "estimate", "--psd-floor", "clip negative eigenvalues of thresholded estimates",
         action="store_true")
    _common_args(p, "estimate", ["text", "json", "csv"])

    p = sub.add_parser("simulate", help="Monte Carlo null rejection probabilities")
    _add(p, "simulate", "--case", "error design: 1 neighbour MA/AR, 2 spatial AR, 3 factors",
         type=int, choices=[1, 2, 3])
    _add(p, "simulate", "--n", "number of units N", type=int)
    _add(p, "simulate", "--t", "number of periods T", type=int)
    _add(p, "simulate", "--beta0", "true slope", type=float)
    _add(p, "simulate", "--rho-x", "AR coefficient of the regressor innovations", type=float)
    _add(p, "simulate", "--gamma-x", "Uniform(0, gamma_x) bound of regressor neighbour weights",
         type=float)
    _add(p, "simulate", "--rho", "case 1 error AR coefficient", type=float)
    _add(p, "simulate", "--gamma", "case 1 Uniform(0, gamma) bound of error neighbour weights",
         type=float)
    _add(p, "simulate", "--psi", "case 2 spatial autoregressive coefficient", type=float)
    _add(p, "simulate", "--r", "case 3 number of factors", type=int)
    _add(p, "simulate", "--rho-f", "case 3 factor AR coefficient", type=float)
    _add(p, "simulate", "--rho-lambda", "case 3 loading AR coefficient", type=float)
    _add(p, "simulate", "--burn-in", "discarded AR(1) start-up periods", type=int)
    _add(p, "simulate", "--lattice", "case 2 contiguity layout", choices=["rook", "chain"])
    _add(p, "simulate", "--bandwidths", "comma-separated bandwidths L")
    _add(p, "simulate", "--thresholds", "comma-separated threshold constants M")
    _add(p, "simulate", "--estimators", "comma list from white,cx,ct,hac,dk,hard,soft")
    _add(p, "simulate", "--reps", "number of replications", type=int)
    _add(p, "simulate", "--level", "nominal significance level", type=float)
    _add(p, "simulate", "--seed", "base seed", type=int)
    _add(p, "simulate", "--threads", "worker processes; results do not depend on it", type=int)
    _common_args(p, "simulate", ["csv", "json", "text"])

    p = sub.add_parser("cv", help="choose the threshold constant M by block cross-validation")
    _data_args(p, "cv")
    _add(p, "cv", "--mode", "thresholding mode", choices=["hard", "soft"])
    _add(p, "cv", "--folds", "number of validation blocks; round(log T) if omitted", type=int)
    _add(p, "cv", "--m0", "upper end of the grid", type=float)
    _add(p, "cv", "--grid", "explicit comma-separated grid of M values")
    _add(p, "cv", "--grid-size", "points in the default grid m0/size..m0", type=int)
    _common_args(p, "cv", ["json"])
    return parser


def _resolve(args, parser) -> dict:
    cmd = args.command
    cfg = {}
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(raw, dict):
            raise UsageError("config file must hold a JSON object")
        cfg = {k.replace("-", "_"): v for k, v in raw.items()}
        unknown = set(cfg) - set(DEFAULTS[cmd]) - {"command"}
        if unknown:
            raise UsageError(f"unknown config keys for {cmd}: {sorted(unknown)}")
    out = {}
    for key, default in DEFAULTS[cmd].items():
        flag = getattr(args, key, None)
        out[key] = flag if flag is not None else cfg.get(key, default)
    if cmd == "simulate" and out["seed"] is None:
        env = os.environ.get(SEED_ENV)
        try:
            out["seed"] = int(env) if env else 0
        except ValueError:
            raise UsageError(f"{SEED_ENV}={env!r} is not an integer") from None
    return out


def _floats(text, name):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--{name} expects comma-separated numbers, got {text!r}") from None


def _ints(text, name):
    vals = _floats(text, name)
    if any(v != int(v) for v in vals):
        raise UsageError(f"--{name} expects integers, got {text!r}")
    return [int(v) for v in vals]


def _names(text):
    if isinstance(text, (list, tuple)):
        return list(text)
    return [v.strip() for v in str(text).split(",") if v.strip()]


def _bandwidth(value):
    if value in (None, "auto"):
        return "auto"
    try:
        bw = int(value)
    except (TypeError, ValueError):
        raise UsageError(f"--bandwidth must be an integer or 'auto', got {value!r}") from None
    if bw < 0:
        raise UsageError("--bandwidth must be nonnegative")
    return bw


def _level(value):
    value = float(value)
    if not 0 < value < 1:
        raise UsageError(f"--level must lie in (0, 1), got {value}")
    return value


def _load(opts):
    if not opts["input"]:
        raise UsageError("--input is required")
    schema = {"unit": opts["unit_col"], "time": opts["time_col"], "y": opts["y_col"]}
    if opts["x_cols"]:
        schema["x"] = _names(opts["x_cols"])
    data = load_csv(opts["input"], schema)
    if not opts["no_fe"]:
        data, _ = within_transform(data)
    return data


def _emit(text, path):
    if path in (None, "-"):
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        Path(path).write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")


# -- commands ----------------------------------------------------------------


def _validate_estimate(opts):
    ests = [normalize_estimator(e) for e in _names(opts["estimators"])]
    if not ests:
        raise UsageError("--estimators must name at least one estimator")
    thr = opts["threshold"]
    if thr != "cv":
        try:
            thr = float(thr)
        except (TypeError, ValueError):
            raise UsageError(f"--threshold must be a number or 'cv', got {thr!r}") from None
        if thr < 0:
            raise UsageError("--threshold must be nonnegative")
    opts.update(
        estimators=ests,
        threshold=thr,
        bandwidth=_bandwidth(opts["bandwidth"]),
        level=_level(opts["level"]),
        null=_floats(opts["null"], "null"),
    )
    if not opts["m0"] > 0:
        raise UsageError("--m0 must be positive")
    if opts["folds"] is not None and int(opts["folds"]) < 1:
        raise UsageError("--folds must be positive")
    if not opts["input"]:
        raise UsageError("--input is required")
    return opts


def cmd_estimate(opts) -> int:
    opts = _validate_estimate(opts)
    data = _load(opts)
    fit = fit_ols(data)
    names = data.regressor_names
    null = opts["null"]
    if len(null) not in (1, len(names)):
        raise UsageError(f"--null needs 1 or {len(names)} values, got {len(null)}")
    reports, failures, cv_info = [], {}, {}
    for est in opts["estimators"]:
        cv = None
        if est in ("Hard", "Soft") and opts["threshold"] == "cv":
            bw = None if opts["bandwidth"] == "auto" else opts["bandwidth"]
            folds = None if opts["folds"] is None else int(opts["folds"])
            cv = CvConfig(folds=folds, m0=float(opts["m0"]), bandwidth=bw, mode=est)
        cov, cv_result = estimate_covariance(
            data.x, fit.residuals, est, opts["bandwidth"], opts["threshold"],
            opts["psd_floor"], cv=cv,
        )
        if cv_result is not None:
            cv_info[est] = cv_result.m_star
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                sw = sandwich_variance(fit, cov)
            reports.append(test_and_ci(fit, sw, null, opts["level"], est, names))
        except NonPositiveVariance as exc:
            failures[est] = f"no standard error ({exc})"
    fmt = opts["format"]
    if fmt == "json":
        text = json.dumps({
            "n_units": data.n_units,
            "n_periods": data.n_periods,
            "names": list(names),
            "beta_hat": fit.beta_hat.tolist(),
            "reports": [r.to_dict() for r in reports],
            "failures": failures,
            "cv_m_star": cv_info,
        }, indent=2)
    elif fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["estimator", "coefficient", "beta", "se", "t", "ci_lower", "ci_upper", "reject"])
        for r in reports:
            for j, name in enumerate(names):
                w.writerow([r.estimator_tag, name, repr(float(r.beta_hat[j])), repr(float(r.se[j])),
                            repr(float(r.t_stats[j])), repr(float(r.ci_lower[j])),
                            repr(float(r.ci_upper[j])), int(r.reject[j])])
        for est, why in failures.items():
            for j, name in enumerate(names):
                w.writerow([est, name, repr(float(fit.beta_hat[j])), "", "", "", "", ""])
        text = buf.getvalue()
    else:
        text = format_table(reports, names, failures, beta=fit.beta_hat)
        text = f"N={data.n_units} T={data.n_periods}\n{text}"
        for est, m in cv_info.items():
            text += f"\n{est}: M chosen by cross-validation = {m:g}"
    _emit(text, opts["output"])
    for est, why in failures.items():
        print(f"warning: {est}: {why}", file=sys.stderr)
    return 0


def cmd_simulate(opts) -> int:
    try:
        dgp = DgpSpec(
            case=int(opts["case"]), n=int(opts["n"]), t=int(opts["t"]), beta0=float(opts["beta0"]),
            rho_x=float(opts["rho_x"]), gamma_x=float(opts["gamma_x"]), rho=float(opts["rho"]),
            gamma=float(opts["gamma"]), psi=float(opts["psi"]), r=int(opts["r"]),
            rho_f=float(opts["rho_f"]), rho_lambda=float(opts["rho_lambda"]),
            burn_in=int(opts["burn_in"]), lattice=opts["lattice"],
        )
        grid = ExperimentGrid(
            dgp=dgp,
            bandwidths=tuple(_ints(opts["bandwidths"], "bandwidths")),
            thresholds=tuple(_floats(opts["thresholds"], "thresholds")),
            estimators=tuple(_names(opts["estimators"])),
            reps=int(opts["reps"]),
            level=_level(opts["level"]),
            base_seed=int(opts["seed"]),
        )
    except InvalidConfig as exc:
        raise UsageError(str(exc)) from None
    threads = int(opts["threads"])
    if threads < 1:
        raise UsageError("--threads must be at least 1")
    t0 = time.perf_counter()
    table = run_experiment(grid, threads=threads)
    elapsed = time.perf_counter() - t0
    fmt = opts["format"]
    if fmt == "json":
        text = json.dumps(table.to_dict(), indent=2)
    elif fmt == "text":
        text = table.to_text()
    else:
        text = table.to_csv()
    _emit(text, opts["output"])
    err = sys.stderr
    print(f"{grid.reps} replications in {elapsed:.1f}s", file=err)
    for r in table.rows:
        print(f"  {r.estimator:5s} L={'' if r.bandwidth is None else r.bandwidth!s:>3s} "
              f"M={'' if r.m is None else f'{r.m:g}':>5s}  rate={r.reject_rate:.3f}  "
              f"mc_se={r.mc_se:.3f}" + (f"  failed={r.failed}" if r.failed else ""), file=err)
    return 0


def cmd_cv(opts) -> int:
    if not opts["input"]:
        raise UsageError("--input is required")
    bw = _bandwidth(opts["bandwidth"])
    try:
        grid = None
        if opts["grid"] is not None:
            grid = tuple(_floats(opts["grid"], "grid"))
        elif int(opts["grid_size"]) != 100:
            from .tuning import default_grid

            grid = default_grid(float(opts["m0"]), int(opts["grid_size"]))
        cfg = CvConfig(
            folds=None if opts["folds"] is None else int(opts["folds"]),
            grid=grid,
            m0=float(opts["m0"]),
            bandwidth=None if bw == "auto" else bw,
            mode=opts["mode"],
        )
    except InvalidConfig as exc:
        raise UsageError(str(exc)) from None
    data = _load(opts)
    fit = fit_ols(data)
    result = cross_validate_m(data.x, fit.residuals, cfg)
    _emit(result.to_json(indent=2), opts["output"])
    stream = sys.stderr if opts["output"] in (None, "-") else sys.stdout
    print(f"M* = {result.m_star:g}", file=stream)
    return 0


COMMANDS = {"estimate": cmd_estimate, "simulate": cmd_simulate, "cv": cmd_cv}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opts = _resolve(args, parser)
        return COMMANDS[args.command](opts)
    except UsageError as exc:
        parser.error(str(exc))
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except PanelSEError as exc:
        where = f"{args.input}: " if getattr(args, "input", None) else ""
        print(f"error: {where}{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
