"""Command-line interface.

Three subcommands:

  mc-bench      Monte Carlo benchmark of the cost metrics on synthetic
                change-point data (slope-break or scale-shift variant).
  synth-bubble  Emit a synthetic bubble series as date,log_price CSV.
  scan          Shrinking-window scan of a CSV series at a fixed t2,
                with OLS or LPPLS windows, emitting curve/lambda/tau
                artifacts plus plot-ready normalised columns.

Every artifact is computed fully before anything is written, and each
file is written to a temporary name and renamed into place.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

from .errors import TauscanError
from .linreg import (
    ChangePointConfig,
    OlsModelFitter,
    monte_carlo_bench,
    simulate_scale_shift,
    write_mc_hist_json,
    write_mc_summary_csv,
)
from .lppls import FilterBounds, LpplsModelFitter
from .metrics import STATUS_OK, normalize_curve, write_curve_csv
from .scan import build_grid, endogenise_t1
from .series import load_csv, write_series_csv
from .synthetic import SyntheticBubbleConfig, synthetic_series

_LAMBDA_MODES = {"intercept": "with-intercept", "zero-intercept": "zero-intercept"}


def _add_shared(parser: argparse.ArgumentParser, seed_required: bool) -> None:
    parser.add_argument("--seed", type=int, required=seed_required, default=None if seed_required else 0,
                        help="base seed; required for randomised commands")
    parser.add_argument("--jobs", type=int, default=1, help="parallel fit workers")
    parser.add_argument("--lambda-mode", choices=sorted(_LAMBDA_MODES), default=None,
                        help="drift regression: free intercept on window length, "
                             "or zero intercept on scan position (default: "
                             "intercept for OLS paths, zero-intercept for LPPLS scans)")


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tauscan",
                                 description="Endogenous calibration-window selection "
                                             "for shrinking-window model scans.")
    sub = ap.add_subparsers(dest="command", required=True)

    mc = sub.add_parser("mc-bench", help="Monte Carlo cost-metric benchmark")
    mc.add_argument("--runs", type=int, required=True, help="number of Monte Carlo runs")
    mc.add_argument("--config", choices=["slope-break", "scale-shift"], default="slope-break",
                    help="slope-break: piecewise slope 0.3/0.6, unit noise; "
                         "scale-shift: single slope with heteroskedastic halves")
    mc.add_argument("--out", required=True, help="summary CSV path; a *_hist.json sidecar "
                                                 "with argmin histograms is written next to it")
    _add_shared(mc, seed_required=True)

    sb = sub.add_parser("synth-bubble", help="emit a synthetic bubble CSV")
    sb.add_argument("--out", required=True, help="output CSV path (date,log_price)")
    sb.add_argument("--sigma", type=float, default=0.03, help="noise standard deviation")
    sb.add_argument("--n-bubble", type=int, default=1100, help="bubble segment length")
    sb.add_argument("--n-mirror", type=int, default=500, help="mirrored prefix length")
    sb.add_argument("--origin", default="1911-07-01",
                    help="calendar label for the first bubble day (weekends roll forward)")
    _add_shared(sb, seed_required=True)

    sc = sub.add_parser("scan", help="shrinking-window scan at a fixed t2")
    sc.add_argument("--input", required=True, help="CSV with date,price or date,log_price")
    group = sc.add_mutually_exclusive_group(required=True)
    group.add_argument("--t2", help="pseudo-present date (must be present in the series)")
    group.add_argument("--t2-index", type=int, help="pseudo-present as trading-day index")
    sc.add_argument("--model", choices=["ols", "lppls"], required=True)
    sc.add_argument("--max-window", type=int, default=1600)
    sc.add_argument("--min-window", type=int, default=30)
    sc.add_argument("--step", type=int, default=3)
    sc.add_argument("--n-starts", type=int, default=6,
                    help="local searches per LPPLS window")
    sc.add_argument("--out-dir", default=".", help="directory for the four artifacts")
    _add_shared(sc, seed_required=False)
    return ap


def _write_atomic(path: str, writer) -> None:
    tmp = f"{path}.tmp"
    writer(tmp)
    os.replace(tmp, path)


def _cmd_mc_bench(args) -> int:
    if args.config == "slope-break":
        config = ChangePointConfig()
        grid = build_grid(t2=config.t_end, max_window=202, min_window=4, step=1)
        generator = None
    else:
        config = None
        grid = build_grid(t2=198, max_window=199, min_window=10, step=1)
        generator = simulate_scale_shift
    mode = _LAMBDA_MODES[args.lambda_mode or "intercept"]
    summary = monte_carlo_bench(config, args.runs, grid, base_seed=args.seed,
                                lambda_mode=mode, jobs=args.jobs,
                                generator=generator)
    root, ext = os.path.splitext(args.out)
    hist_path = f"{root}_hist.json"
    _write_atomic(args.out, lambda p: write_mc_summary_csv(summary, p))
    _write_atomic(hist_path, lambda p: write_mc_hist_json(summary, p))
    print(f"wrote {args.out} and {hist_path} ({summary.n_runs} runs)")
    return 0


def _cmd_synth_bubble(args) -> int:
    config = SyntheticBubbleConfig(sigma=args.sigma, n_bubble=args.n_bubble,
                                   n_mirror=args.n_mirror, origin=args.origin)
    series = synthetic_series(config, args.seed)
    _write_atomic(args.out, lambda p: write_series_csv(series, p))
    print(f"wrote {args.out} ({len(series)} rows, inception index {config.n_mirror})")
    return 0


def _write_plot_csv(curve, path: str) -> None:
    ok = [e for e in curve.entries if e.status == STATUS_OK and e.chi2_lambda is not None]
    t1s = [e.t1 for e in ok]
    cols = {
        "chi2_norm": normalize_curve([e.cost.chi2 for e in ok]),
        "chi2_np_norm": normalize_curve([e.cost.chi2_np for e in ok]),
        "chi2_lambda_norm": normalize_curve([e.chi2_lambda for e in ok]),
    }
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t1"] + list(cols))
        for j, t1 in enumerate(t1s):
            w.writerow([t1] + [repr(float(cols[name][j])) for name in cols])


def _cmd_scan(args) -> int:
    series = load_csv(args.input)
    if args.t2 is not None:
        t2_idx = series.index_of(args.t2)
    else:
        t2_idx = args.t2_index
        if not 0 <= t2_idx < len(series):
            raise TauscanError(f"--t2-index {t2_idx} outside 0 .. {len(series) - 1}")
    available = t2_idx + 1
    max_window = min(args.max_window, available)
    if max_window < args.min_window:
        raise TauscanError(
            f"only {available} observations up to t2; min window is {args.min_window}"
        )
    grid = build_grid(t2_idx, max_window, args.min_window, args.step)
    if args.model == "ols":
        fitter = OlsModelFitter()
        mode = _LAMBDA_MODES[args.lambda_mode or "intercept"]
    else:
        fitter = LpplsModelFitter(bounds=FilterBounds(), n_starts=args.n_starts)
        mode = _LAMBDA_MODES[args.lambda_mode or "zero-intercept"]
    result = endogenise_t1(series, grid, fitter, lambda_mode=mode,
                           base_seed=args.seed, jobs=args.jobs)
    n_valid = sum(1 for e in result.curve.entries if e.status == STATUS_OK)
    tau_report = {
        "t2": str(series.date_of(t2_idx)),
        "tau_date": str(series.date_of(result.tau)),
        "tau_index": result.tau,
        "lambda": result.lambda_est.slope,
        "n_valid_windows": n_valid,
    }
    out = args.out_dir
    os.makedirs(out, exist_ok=True)
    _write_atomic(os.path.join(out, "curve.csv"),
                  lambda p: write_curve_csv(result.curve, p))
    _write_atomic(os.path.join(out, "lambda.json"),
                  lambda p: _dump_json(result.lambda_est.as_dict(), p))
    _write_atomic(os.path.join(out, "tau.json"),
                  lambda p: _dump_json(tau_report, p))
    _write_atomic(os.path.join(out, "plot.csv"),
                  lambda p: _write_plot_csv(result.curve, p))
    print(f"tau = {tau_report['tau_date']} (index {result.tau}), "
          f"lambda = {result.lambda_est.slope:.6g}, {n_valid} valid windows")
    return 0


def _dump_json(doc: dict, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "mc-bench":
            return _cmd_mc_bench(args)
        if args.command == "synth-bubble":
            return _cmd_synth_bubble(args)
        return _cmd_scan(args)
    except (TauscanError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
