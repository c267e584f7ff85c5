"""Linear-regression change-point benchmark.

A controlled experiment for the window endogenisation: simulate a linear
trend whose slope breaks at a known time, scan shrinking windows with a
closed-form no-intercept OLS fit, and compare where each cost metric
puts its minimum. Monte Carlo aggregation produces the confidence bands
used by the acceptance checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateBasisError, TauscanError
from .metrics import STATUS_FAILED, STATUS_OK, ScanCurve
from .scan import FitResult, ScanGrid, endogenise_t1
from .series import IndexedSeries


@dataclass(frozen=True)
class ChangePointConfig:
    """Piecewise-linear generator: slope beta_pre before t_change, beta_post from it on."""

    t_start: int = -200
    t_change: int = -100
    t_end: int = 1
    beta_pre: float = 0.3
    beta_post: float = 0.6
    noise_sd: float = 1.0

    def __post_init__(self):
        if not self.t_start < self.t_change < self.t_end:
            raise TauscanError("need t_start < t_change < t_end")
        if self.noise_sd <= 0:
            raise TauscanError("noise_sd must be positive")


def simulate_change_point(config: ChangePointConfig, seed: int) -> IndexedSeries:
    """Y_t = beta_pre*t + eps for t < t_change, beta_post*t + eps from t_change on.

    eps is i.i.d. Gaussian(0, noise_sd^2) drawn from numpy's default
    generator seeded with `seed`; the draw order is one normal per t in
    ascending t, which pins the seed-to-series mapping.
    """
    t = np.arange(config.t_start, config.t_end + 1, dtype=float)
    eps = np.random.default_rng(seed).normal(0.0, config.noise_sd, t.size)
    beta = np.where(t < config.t_change, config.beta_pre, config.beta_post)
    return IndexedSeries(beta * t + eps, start=config.t_start)


def simulate_scale_shift(seed: int, n: int = 200) -> IndexedSeries:
    """Alternative generator: one slope, heteroskedastic halves.

    Y = 0.5*X + e with e ~ N(0, 10), then the first half gets 4e added
    on top and the second half is scaled by 8. The break at the midpoint
    is in the noise structure, not the slope.
    """
    if n < 2:
        raise TauscanError(f"need n >= 2, got {n}")
    x = np.arange(n, dtype=float)
    e = np.random.default_rng(seed).normal(0.0, 10.0, n)
    y = 0.5 * x + e
    half = n // 2
    y[:half] = y[:half] + 4.0 * e[:half]
    y[half:] = y[half:] * 8.0
    return IndexedSeries(y, start=0)


def ols_fit(x, y) -> tuple[float, np.ndarray]:
    """No-intercept least squares: beta_hat = sum(xy) / sum(x^2).

    Returns:
        (beta_hat, residuals) with residuals = y - beta_hat*x.

    Raises:
        DegenerateBasisError: if sum(x^2) == 0.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise TauscanError("x and y must be equal-length 1-d vectors of >= 2 points")
    sxx = float(np.dot(x, x))
    if sxx == 0.0:
        raise DegenerateBasisError("all-zero regressor: no-intercept slope undefined")
    beta = float(np.dot(x, y)) / sxx
    return beta, y - beta * x


@dataclass(frozen=True)
class OlsModelFitter:
    """ModelFitter adapter for the closed-form no-intercept OLS. p = 1."""

    degrees_of_freedom: int = 1

    def fit(self, t, y, seed: int) -> FitResult:
        try:
            beta, resid = ols_fit(t, y)
        except DegenerateBasisError as exc:
            return FitResult(payload=None, residuals=None,
                             status=STATUS_FAILED, message=str(exc))
        return FitResult(payload={"beta": beta}, residuals=resid, status=STATUS_OK)


@dataclass(frozen=True)
class McSummary:
    """Per-t1 Monte Carlo statistics for the three cost metrics.

    Arrays are aligned with t1_values. argmin_hist maps each metric name
    to a dict {t1: count of runs whose curve minimum fell there}.
    """

    t1_values: tuple
    mean: dict
    q05: dict
    q95: dict
    argmin_hist: dict
    n_runs: int

    METRICS = ("chi2", "chi2_np", "chi2_lambda")

    def __post_init__(self):
        for name in self.METRICS:
            m, lo, hi = self.mean[name], self.q05[name], self.q95[name]
            if not (np.all(lo <= m + 1e-12) and np.all(m <= hi + 1e-12)):
                raise TauscanError(f"quantile bands for {name} are not ordered")


def _metric_matrix(curve: ScanCurve, which: str) -> np.ndarray:
    if which == "chi2":
        return np.array([e.cost.chi2 for e in curve.entries])
    if which == "chi2_np":
        return np.array([e.cost.chi2_np for e in curve.entries])
    return np.array([e.chi2_lambda for e in curve.entries])


def monte_carlo_bench(config: ChangePointConfig, n_runs: int, grid: ScanGrid,
                      base_seed: int = 0, lambda_mode: str = "with-intercept",
                      jobs: int = 1, generator=None) -> McSummary:
    """Repeat endogenise_t1 over fresh seeded realisations and aggregate.

    Run i uses the seed derived from SeedSequence((base_seed, i)), so a
    given (base_seed, n_runs, grid) triple always reproduces the same
    summary, independent of execution order. A custom `generator(seed)`
    replaces the default change-point simulator when provided.
    """
    if n_runs < 1:
        raise TauscanError(f"n_runs must be >= 1, got {n_runs}")
    fitter = OlsModelFitter()
    t1s = grid.t1_values
    rows = {name: np.empty((n_runs, len(t1s))) for name in McSummary.METRICS}
    argmins = {name: [] for name in McSummary.METRICS}
    for i in range(n_runs):
        run_seed = int(np.random.SeedSequence(entropy=(int(base_seed), i)).generate_state(1)[0])
        if generator is not None:
            series = generator(run_seed)
        else:
            series = simulate_change_point(config, run_seed)
        result = endogenise_t1(series, grid, fitter, lambda_mode=lambda_mode, jobs=jobs)
        if any(e.status != STATUS_OK for e in result.curve.entries):
            raise TauscanError("OLS scan produced a failed window; cannot aggregate")
        for name in McSummary.METRICS:
            vals = _metric_matrix(result.curve, name)
            rows[name][i] = vals
            argmins[name].append(t1s[int(np.argmin(vals))])
    mean = {}
    q05 = {}
    q95 = {}
    hist = {}
    for name in McSummary.METRICS:
        mean[name] = rows[name].mean(axis=0)
        q05[name] = np.quantile(rows[name], 0.05, axis=0)
        q95[name] = np.quantile(rows[name], 0.95, axis=0)
        counts = {}
        for t1 in argmins[name]:
            counts[t1] = counts.get(t1, 0) + 1
        hist[name] = counts
    return McSummary(t1_values=t1s, mean=mean, q05=q05, q95=q95,
                     argmin_hist=hist, n_runs=n_runs)


def write_mc_summary_csv(summary: McSummary, path) -> None:
    """One row per t1; mean and quantile columns for each metric."""
    import csv

    cols = ["t1"]
    for name in McSummary.METRICS:
        cols += [f"{name}_mean", f"{name}_q05", f"{name}_q95"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for j, t1 in enumerate(summary.t1_values):
            row = [t1]
            for name in McSummary.METRICS:
                row += [repr(float(summary.mean[name][j])),
                        repr(float(summary.q05[name][j])),
                        repr(float(summary.q95[name][j]))]
            w.writerow(row)


def write_mc_hist_json(summary: McSummary, path) -> None:
    import json

    doc = {
        "n_runs": summary.n_runs,
        "argmin_hist": {
            name: {str(t1): c for t1, c in sorted(summary.argmin_hist[name].items())}
            for name in McSummary.METRICS
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
