"""Command-line interface: fit, tune, simulate, and rolling forecasts.

CSV inputs are comma-separated UTF-8 with a required header row; the
first column is the response and the remaining columns are regressors.
Reports are JSON and embed the resolved configuration plus the package
version. Flagged rows are 1-based in input order.

Exit codes: 0 success, 2 usage or configuration error, 3 data error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial

import numpy as np

from . import __version__
from .classic import fit_lad, fit_ols, fit_huber, initial_beta
from .dgp import (
    ESTIMATOR_FACTORIES,
    DgpConfig,
    record_rows,
    run_monte_carlo_records,
    summary_rows,
)
from .errors import (
    DimensionError,
    ParseError,
    TrimregError,
    WindowTooLarge,
)
from .l0 import (
    BIC_SELECTION_MULT,
    fit_l0_auto,
    fit_lcs,
    neighborhood_search,
    selection_score,
)
from .l1 import (
    BIC_SELECTION_MULT as L1_SELECTION_MULT,
    bic_l1,
    default_psi_grid,
    fit_l1,
    select_psi_bic,
    soft_threshold_alpha,
)
from .linalg import Dataset

METHODS = ("l0", "l1", "lad", "ols", "huber")


class UsageError(Exception):
    """Bad flag combination or invalid configuration value."""


def read_csv_dataset(path: str) -> tuple[Dataset, list[str]]:
    """Parse a CSV with header into a Dataset; errors carry row/column."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not rows:
        raise ParseError(f"{path}: file is empty (header row required)")
    header = [h.strip() for h in rows[0]]
    ncol = len(header)
    if ncol < 1:
        raise ParseError(f"{path}: header row has no columns")
    if len(rows) < 2:
        raise ParseError(f"{path}: no data rows below the header")
    values = np.empty((len(rows) - 1, ncol))
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != ncol:
            raise ParseError(
                f"{path}: row {i} has {len(row)} columns, expected {ncol}"
            )
        for j, cell in enumerate(row, start=1):
            try:
                val = float(cell)
            except ValueError as exc:
                raise ParseError(
                    f"{path}: row {i}, column {j}: not a number: {cell!r}"
                ) from exc
            if not np.isfinite(val):
                raise ParseError(f"{path}: row {i}, column {j}: non-finite value")
            values[i - 2, j - 1] = val
    try:
        data = Dataset(y=values[:, 0], x=values[:, 1:])
    except ValueError as exc:
        raise DimensionError(str(exc)) from exc
    return data, header


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def write_report(report: dict, out: str | None) -> None:
    text = json.dumps(report, indent=2, default=_json_default)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def write_csv(path: str, rows: list[dict], fieldnames: list[str] | None = None) -> None:
    if not rows and fieldnames is None:
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames or list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


# ---------------------------------------------------------------------------
# fit / tune
# ---------------------------------------------------------------------------


def _validate_method_flags(args) -> None:
    if args.method != "l0" and args.k is not None:
        raise UsageError("--k is only valid with --method l0")
    if args.method not in ("l1", "huber") and args.psi is not None:
        raise UsageError("--psi is only valid with --method l1 or huber")
    if args.method in ("lad", "ols", "huber") and args.auto:
        raise UsageError("--auto is only valid with --method l0 or l1")
    if args.method == "l0" and (args.k is None) == (not args.auto):
        raise UsageError("--method l0 needs exactly one of --k or --auto")
    if args.method == "l1" and (args.psi is None) == (not args.auto):
        raise UsageError("--method l1 needs exactly one of --psi or --auto")
    if args.method == "huber" and args.psi is None:
        raise UsageError("--method huber requires --psi")


def _default_k_max(n: int) -> int:
    return max(1, min(n // 2, n // 4))


def _fit_once(data: Dataset, args) -> dict:
    """Run the requested method; return beta/alpha/objective and tuning info."""
    n = data.n_obs
    if args.method == "ols":
        fit = fit_ols(data)
        return {"beta": fit.beta, "alpha": np.zeros(n), "objective": fit.objective,
                "tuning": None, "converged": fit.converged}
    if args.method == "lad":
        fit = fit_lad(data)
        return {"beta": fit.beta, "alpha": np.zeros(n), "objective": fit.objective,
                "tuning": None, "converged": fit.converged}
    if args.method == "huber":
        fit = fit_huber(data, args.psi)
        alpha = soft_threshold_alpha(data.y - data.design @ fit.beta, args.psi)
        return {"beta": fit.beta, "alpha": alpha, "objective": fit.objective,
                "tuning": {"psi": args.psi}, "converged": fit.converged}
    if args.method == "l1":
        if args.auto:
            sol = select_psi_bic(data)
            tuning = {"psi": sol.psi, "selected_by": "bic"}
        else:
            sol = fit_l1(data, args.psi)
            tuning = {"psi": sol.psi}
        return {"beta": sol.beta, "alpha": sol.alpha, "objective": sol.objective,
                "tuning": tuning, "converged": True}
    # l0
    if args.auto:
        K = args.k_max if args.k_max else _default_k_max(n)
        sol = fit_l0_auto(data, K=K, l_final=args.l)
        tuning = {
            "k": sol.info["k_hat"],
            "selected_by": "bic",
            "bic_trace": [
                {"k": k, "objective": obj, "bic": b}
                for k, obj, b in sol.info["bic_trace"]
            ],
        }
    else:
        sol = fit_lcs(data, args.k, initial_beta(data), args.l)
        tuning = {"k": args.k}
    return {"beta": sol.beta, "alpha": sol.alpha, "objective": sol.objective,
            "tuning": tuning, "converged": True}


def cmd_fit(args) -> int:
    _validate_method_flags(args)
    data, header = read_csv_dataset(args.input)
    res = _fit_once(data, args)
    alpha = np.asarray(res["alpha"])
    flagged = np.flatnonzero(alpha != 0.0)
    report = {
        "command": "fit",
        "version": __version__,
        "config": _resolved_config(args),
        "columns": {"response": header[0], "regressors": header[1:]},
        "n_obs": data.n_obs,
        "beta": res["beta"],
        "objective": res["objective"],
        "converged": res["converged"],
        "tuning": res["tuning"],
        "outlier_rows": (flagged + 1).tolist(),
        "alpha": [{"row": int(i) + 1, "value": float(alpha[i])} for i in flagged],
    }
    write_report(report, args.out)
    return 0


def cmd_tune(args) -> int:
    data, header = read_csv_dataset(args.input)
    if args.method == "l0":
        K = args.k_max if args.k_max else _default_k_max(data.n_obs)
        sols = neighborhood_search(data, initial_beta(data), K, args.l)
        trace = []
        best_k, best_bic = None, np.inf
        for sol in sols:
            b = selection_score(data, sol, BIC_SELECTION_MULT)
            trace.append({
                "k": sol.k, "objective": sol.objective, "bic": b,
                "n_outliers": int(sol.outliers.shape[0]),
            })
            if b < best_bic:
                best_k, best_bic = sol.k, b
        selection = {"k": best_k, "bic": best_bic}
    elif args.method == "l1":
        beta0 = initial_beta(data)
        grid = default_psi_grid(data, args.grid_size, lad_beta=beta0)
        trace = []
        best_psi, best_bic = None, np.inf
        for psi in grid:
            try:
                sol = fit_l1(data, float(psi), beta0=beta0)
            except TrimregError:
                continue
            b = bic_l1(data, sol, L1_SELECTION_MULT)
            trace.append({
                "psi": float(psi), "objective": sol.objective, "bic": b,
                "n_outliers": sol.n_outliers,
            })
            if b <= best_bic:
                best_psi, best_bic = float(psi), b
        selection = {"psi": best_psi, "bic": best_bic}
    else:
        raise UsageError("tune supports --method l0 or l1")
    report = {
        "command": "tune",
        "version": __version__,
        "config": _resolved_config(args),
        "columns": {"response": header[0], "regressors": header[1:]},
        "trace": trace,
        "selected": selection,
    }
    write_report(report, args.out)
    return 0


# ---------------------------------------------------------------------------
# forecast
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _ForecastSpec:
    method: str
    k: int | None
    psi: float | None
    auto: bool
    l: int
    k_max: int | None


def _forecast_one(y: np.ndarray, x: np.ndarray, window: int, spec: _ForecastSpec, t: int):
    """Fit on rows [t-window, t-1] (0-based), predict row t."""
    sl = slice(t - window, t)
    data = Dataset(y=y[sl], x=x[sl])
    args = argparse.Namespace(
        method=spec.method, k=spec.k, psi=spec.psi, auto=spec.auto,
        l=spec.l, k_max=spec.k_max,
    )
    try:
        res = _fit_once(data, args)
    except (TrimregError, np.linalg.LinAlgError) as exc:
        return {"target": t, "skipped": True, "reason": str(exc),
                "forecast": np.nan, "sq_error": np.nan, "flagged": []}
    beta = np.asarray(res["beta"])
    xt = np.concatenate([[1.0], x[t]])
    fc = float(xt @ beta)
    flagged = (np.flatnonzero(np.asarray(res["alpha"]) != 0.0) + (t - window)).tolist()
    return {
        "target": t, "skipped": False, "reason": "",
        "forecast": fc, "sq_error": (y[t] - fc) ** 2, "flagged": flagged,
    }


def _parse_subperiods(text: str, t_min: int, t_max: int) -> list[tuple[int, int]]:
    """Parse "start:end,start:end" 1-based inclusive target ranges."""
    spans = []
    for piece in text.split(","):
        try:
            a, b = piece.split(":")
            lo, hi = int(a), int(b)
        except ValueError as exc:
            raise UsageError(f"subperiods: cannot parse {piece!r}") from exc
        if lo > hi:
            raise UsageError(f"subperiods: empty range {piece!r}")
        if lo < t_min or hi > t_max:
            raise UsageError(
                f"subperiods: {piece!r} outside forecast targets [{t_min}, {t_max}]"
            )
        spans.append((lo, hi))
    return spans


def cmd_forecast(args) -> int:
    _validate_method_flags(args)
    data, header = read_csv_dataset(args.input)
    y, x = data.y, data.x
    T = data.n_obs
    d = x.shape[1]
    if args.window < d + 2:
        raise UsageError(f"--window must be at least d+2 = {d + 2}")
    if args.window >= T:
        raise WindowTooLarge(f"window {args.window} leaves no targets in {T} rows")
    spec = _ForecastSpec(
        method=args.method, k=args.k, psi=args.psi, auto=args.auto,
        l=args.l, k_max=args.k_max,
    )
    targets = list(range(args.window, T))  # 0-based target rows
    worker = partial(_forecast_one, y, x, args.window, spec)
    if args.threads > 1:
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            results = list(pool.map(worker, targets))
    else:
        results = [worker(t) for t in targets]

    ok = [r for r in results if not r["skipped"]]
    mpse = float(np.mean([r["sq_error"] for r in ok])) if ok else np.nan
    t_min, t_max = args.window + 1, T  # 1-based target range
    subperiods = []
    if args.subperiods:
        for lo, hi in _parse_subperiods(args.subperiods, t_min, t_max):
            inside = [r for r in ok if lo <= r["target"] + 1 <= hi]
            subperiods.append({
                "start": lo, "end": hi,
                "mpse": float(np.mean([r["sq_error"] for r in inside])) if inside else np.nan,
                "n_targets": len(inside),
            })

    forecast_rows = [{
        "target_row": r["target"] + 1,
        "actual": y[r["target"]],
        "forecast": r["forecast"],
        "sq_error": r["sq_error"],
        "skipped": r["skipped"],
        "n_flagged": len(r["flagged"]),
    } for r in results]
    if args.forecasts_csv:
        write_csv(args.forecasts_csv, forecast_rows)
    if args.flags_csv:
        flag_rows = [
            {"target_row": r["target"] + 1, "window_row": f + 1}
            for r in results for f in r["flagged"]
        ]
        write_csv(args.flags_csv, flag_rows, fieldnames=["target_row", "window_row"])

    report = {
        "command": "forecast",
        "version": __version__,
        "config": _resolved_config(args),
        "columns": {"response": header[0], "regressors": header[1:]},
        "n_obs": T,
        "window": args.window,
        "n_targets": len(targets),
        "n_skipped": len(results) - len(ok),
        "mpse": mpse,
        "subperiods": subperiods,
        "forecasts": forecast_rows,
    }
    write_report(report, args.out)
    return 0


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

_SIM_FIELDS = {
    "dgp": int, "N": int, "p": float, "mu_alpha": float, "sigma_alpha": float,
    "rho": float, "seed": int, "n_test": int, "R": int, "estimators": list,
    "oracle_k": (int, type(None)), "threads": int,
}


def _load_sim_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise UsageError("config root must be a JSON object")
    for key in raw:
        if key not in _SIM_FIELDS:
            raise UsageError(f"{key}: unknown configuration field")
    for key in ("dgp", "N", "p", "R"):
        if key not in raw:
            raise UsageError(f"{key}: required field missing")
    if not isinstance(raw["dgp"], int) or raw["dgp"] not in (1, 2, 3):
        raise UsageError("dgp: must be 1, 2, or 3")
    if not isinstance(raw["N"], int) or raw["N"] < 2:
        raise UsageError("N: must be an integer >= 2")
    if not isinstance(raw["p"], (int, float)) or not 0 < raw["p"] < 1:
        raise UsageError("p: must lie in (0, 1)")
    if int(np.floor(raw["p"] * raw["N"])) < 1:
        raise UsageError("p: floor(p*N) must be at least 1")
    if not isinstance(raw["R"], int) or raw["R"] < 1:
        raise UsageError("R: must be an integer >= 1")
    est = raw.get("estimators", ["l0", "l1", "lad", "ols"])
    if not isinstance(est, list) or not est:
        raise UsageError("estimators: must be a non-empty list")
    for name in est:
        if name not in ESTIMATOR_FACTORIES:
            raise UsageError(
                f"estimators: unknown name {name!r}; choose from "
                f"{sorted(ESTIMATOR_FACTORIES)}"
            )
    raw["estimators"] = est
    return raw


def cmd_simulate(args) -> int:
    raw = _load_sim_config(args.config)
    if args.seed is not None:
        raw["seed"] = args.seed
    cfg = DgpConfig(
        dgp=raw["dgp"], N=raw["N"], p=raw["p"],
        mu_alpha=raw.get("mu_alpha", 0.0),
        sigma_alpha=raw.get("sigma_alpha", 5.0),
        rho=raw.get("rho", 5.0), seed=raw.get("seed", 0),
        n_test=raw.get("n_test", 1000),
    )
    estimators = [ESTIMATOR_FACTORIES[name]() for name in raw["estimators"]]
    threads = args.threads if args.threads > 1 else raw.get("threads", 1)
    summaries, records = run_monte_carlo_records(
        cfg, estimators, raw["R"], oracle_k=raw.get("oracle_k"), threads=threads,
    )
    prefix = args.out or "simulation"
    write_csv(prefix + "_summary.csv", summary_rows(cfg, summaries))
    write_csv(prefix + "_records.csv", record_rows(cfg, records))
    report = {
        "command": "simulate",
        "version": __version__,
        "config": dict(raw, threads=threads),
        "summaries": {
            name: {
                "bias": s.bias, "rmse": s.rmse,
                "prediction_error": s.prediction_error,
                "equal_oracle_freq": s.equal_oracle_freq,
                "mean_gap": s.mean_gap,
                "mean_cpu_seconds": s.mean_cpu_seconds,
                "n_reps": s.n_reps, "n_failed": s.n_failed,
                "high_failure": s.high_failure,
            }
            for name, s in summaries.items()
        },
    }
    write_report(report, prefix + ".json")
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _resolved_config(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    return cfg


def _add_method_flags(sub) -> None:
    sub.add_argument("--method", choices=METHODS, required=True)
    sub.add_argument("--k", type=int, default=None, help="outlier budget (l0)")
    sub.add_argument("--psi", type=float, default=None, help="threshold (l1/huber)")
    sub.add_argument("--auto", action="store_true", help="tune k or psi by BIC")
    sub.add_argument("--l", type=int, choices=(1, 2), default=2,
                     help="swap-search order for l0")
    sub.add_argument("--k-max", dest="k_max", type=int, default=None,
                     help="largest budget scanned by --auto (default N//4)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trimreg",
        description="Robust regression with hard or soft outlier thresholding",
    )
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    p_fit = subs.add_parser("fit", help="fit one model to a CSV")
    p_fit.add_argument("input")
    _add_method_flags(p_fit)
    p_fit.add_argument("--out", default=None, help="JSON report path (default stdout)")
    p_fit.add_argument("--seed", type=int, default=None)
    p_fit.add_argument("--threads", type=int, default=1)
    p_fit.set_defaults(func=cmd_fit)

    p_tune = subs.add_parser("tune", help="trace the BIC over a tuning grid")
    p_tune.add_argument("input")
    p_tune.add_argument("--method", choices=("l0", "l1"), required=True)
    p_tune.add_argument("--k-max", dest="k_max", type=int, default=None)
    p_tune.add_argument("--l", type=int, choices=(1, 2), default=1)
    p_tune.add_argument("--grid-size", dest="grid_size", type=int, default=30)
    p_tune.add_argument("--out", default=None)
    p_tune.add_argument("--seed", type=int, default=None)
    p_tune.add_argument("--threads", type=int, default=1)
    p_tune.set_defaults(func=cmd_tune)

    p_fc = subs.add_parser("forecast", help="rolling one-step-ahead backtest")
    p_fc.add_argument("input")
    _add_method_flags(p_fc)
    p_fc.add_argument("--window", type=int, required=True,
                      help="rolling estimation window length (rows)")
    p_fc.add_argument("--subperiods", default=None,
                      help="1-based inclusive target ranges, e.g. 130:150,151:170")
    p_fc.add_argument("--forecasts-csv", dest="forecasts_csv", default=None)
    p_fc.add_argument("--flags-csv", dest="flags_csv", default=None,
                      help="CSV of (target_row, window_row) outlier flags")
    p_fc.add_argument("--out", default=None)
    p_fc.add_argument("--seed", type=int, default=None)
    p_fc.add_argument("--threads", type=int, default=1)
    p_fc.set_defaults(func=cmd_forecast)

    p_sim = subs.add_parser("simulate", help="run a replication study")
    p_sim.add_argument("--config", required=True, help="JSON configuration file")
    p_sim.add_argument("--out", default=None, help="output prefix (default 'simulation')")
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--threads", type=int, default=1)
    p_sim.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ParseError, DimensionError, WindowTooLarge) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (TrimregError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
