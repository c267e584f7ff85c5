"""Acceptance gate: one pass/fail per headline capability.

Each test pins a single behaviour at a fixed tolerance. The Monte Carlo
benchmark feeding the first three tests is computed once per module.
Known shortfalls are documented in the failing test's docstring and the
thresholds are left as intended rather than widened to fit; a red test
here is a statement about the implementation, not about the suite.
"""

import os
import time
from pathlib import Path

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

import _reference_pipeline as reference
from _curves import curve_from_chi2_np, entry_from_chi2_np
from tauscan.linreg import (
    ChangePointConfig,
    OlsModelFitter,
    monte_carlo_bench,
    ols_fit,
    simulate_change_point,
)
from tauscan.lppls import (
    LpplsModelFitter,
    LpplsParams,
    bubble_scan,
    fit_nonlinear,
    lppls_eval,
    solve_linear_params,
)
from tauscan.metrics import (
    LambdaEstimate,
    ScanCurve,
    chi2_lambda,
    detrend_curve,
    estimate_lambda,
    select_tau,
)
from tauscan.scan import build_grid, run_scan
from tauscan.series import load_csv
from tauscan.synthetic import SyntheticBubbleConfig, bubble_mean_path, synthetic_series

MC_RUNS = 2000
MC_SEED = 10


@pytest.fixture(scope="module")
def mc():
    """One 2000-run change-point benchmark, shared by the first three tests."""
    grid = build_grid(t2=1, max_window=202, min_window=4, step=1)
    start = time.perf_counter()
    summary = monte_carlo_bench(ChangePointConfig(), MC_RUNS, grid, base_seed=MC_SEED)
    return summary, time.perf_counter() - start


def test_01_regularised_mean_curve_minimises_at_the_break(mc):
    """The mean chi2_lambda curve has a unique global minimum within 5
    observations of the true change point at t = -100, and the whole
    2000-run benchmark completes in under two minutes."""
    summary, elapsed = mc
    mean = summary.mean["chi2_lambda"]
    t1 = np.asarray(summary.t1_values)
    assert int(np.sum(mean == mean.min())) == 1
    argmin_t1 = int(t1[int(np.argmin(mean))])
    assert -105 <= argmin_t1 <= -95
    assert elapsed < 120.0


def test_02_normalised_mean_curve_biases_short_of_the_break(mc):
    """Without the regulariser the mean chi2_np curve bottoms out late,
    between the break and 20 observations after it, and is nearly flat
    there: relative spread below 2% over t1 in [-100, -60]."""
    summary, _ = mc
    mean = summary.mean["chi2_np"]
    t1 = np.asarray(summary.t1_values)
    argmin_t1 = int(t1[int(np.argmin(mean))])
    assert -100 <= argmin_t1 <= -80
    plateau = mean[(t1 >= -100) & (t1 <= -60)]
    assert plateau.size > 0
    assert (plateau.max() - plateau.min()) / plateau.min() < 0.02


def test_03_raw_cost_concentrates_on_smallest_windows(mc):
    """The un-normalised chi2 shrinks with window size by construction,
    so its per-run argmin should pile onto the shortest windows: more
    than 80% of the mass in the smallest decile of window lengths."""
    summary, _ = mc
    t1 = sorted(summary.t1_values)
    n_decile = -(-len(t1) // 10)
    shortest = set(t1[-n_decile:])  # largest t1 = shortest windows
    hist = summary.argmin_hist["chi2"]
    mass = sum(count for start, count in hist.items() if start in shortest)
    assert mass / summary.n_runs > 0.8


def test_04_engine_matches_loop_reference_within_1e9():
    """On 50 seeded change-point series the scan engine reproduces the
    loop-based reference costs and the zero-intercept drift slope to
    1e-9 relative."""
    config = ChangePointConfig()
    grid = build_grid(t2=0, max_window=201, min_window=10, step=1)
    fitter = OlsModelFitter()
    for seed in range(50):
        series = simulate_change_point(config, seed)
        x = np.arange(series.start, series.start + series.values.size, dtype=float)
        raw_ref, normed_ref = reference.shrinking_costs(x, series.values)
        curve = run_scan(series, grid, fitter)
        assert len(curve.entries) == len(raw_ref)
        for entry, raw, normed in zip(curve.entries, raw_ref, normed_ref):
            assert abs(entry.cost.chi2 - raw) <= 1e-9 * abs(raw)
            assert abs(entry.cost.chi2_np - normed) <= 1e-9 * abs(normed)
        slope = estimate_lambda(curve, mode="zero-intercept").slope
        slope_ref = reference.drift_slope(normed_ref)
        assert abs(slope - slope_ref) <= 1e-9 * abs(slope_ref)


def test_05_linear_subsystem_recovered_to_1e8():
    """Generate-then-solve round trip for the enslaved linear part: 100
    random admissible (tc, m, omega) with random linear coefficients,
    recovered to 1e-8 relative, normal-equation residual below 1e-10.

    The window is kept short (40 points) so the bound on the residual
    norm is meaningful: it scales with the Gram matrix magnitude, which
    grows quickly with (tc - t)^m."""
    rng = np.random.default_rng(42)
    t = np.arange(0.0, 40.0)
    t2 = t[-1]
    for _ in range(100):
        tc = t2 + rng.uniform(5.0, 38.0)
        m = rng.uniform(0.1, 0.9)
        omega = rng.uniform(6.0, 13.0)
        linear = rng.choice([-1.0, 1.0], 4) * rng.uniform(0.2, 2.0, 4)
        truth = LpplsParams(A=linear[0], B=linear[1], C1=linear[2], C2=linear[3],
                            m=m, omega=omega, tc=tc)
        solved = np.asarray(solve_linear_params(t, lppls_eval(truth, t), tc, m, omega))
        assert np.all(np.abs(solved - linear) <= 1e-8 * np.abs(linear))
        dt = tc - t
        f = dt ** m
        ang = omega * np.log(dt)
        design = np.column_stack((np.ones_like(f), f, f * np.cos(ang), f * np.sin(ang)))
        residual = design.T @ design @ solved - design.T @ lppls_eval(truth, t)
        assert float(np.linalg.norm(residual)) < 1e-10


def test_06_noiseless_nonlinear_recovery():
    """Calibrating the full noiseless mean path recovers the generator's
    nonlinear triple: m within 0.02, omega within 0.2, tc within 5."""
    config = SyntheticBubbleConfig()
    t = np.arange(1.0, config.n_bubble + 1.0)
    fit = fit_nonlinear(t, bubble_mean_path(config))
    assert fit.params is not None
    assert abs(fit.params.m - config.params.m) <= 0.02
    assert abs(fit.params.omega - config.params.omega) <= 0.2
    assert abs(fit.params.tc - config.params.tc) <= 5.0
    assert fit.filter_pass


def test_07_synthetic_inception_ensemble():
    """Twenty seeded bubbles (sigma = 0.03): the endogenous start at the
    final pseudo-present should land within 60 observations of the true
    inception at index 500 in at least 16 of 20 seeds, and moving the
    pseudo-present back to index 1470 should not push the estimate later
    than the final one by more than the same margin.

    Measured on this implementation, final-t2 estimates for seeds 0-19:
    454, 505, 559, 376, 376, 367, 370, 412, 442, 415, 460, 427, 445,
    844, 460, 409, 1, 403, 430, 928 - seven of twenty inside [440, 560].
    Early leg (t2 = 1470, seeds 0-2): 823, 1210, 445 against final
    estimates 454, 505, 559, so seeds 0 and 1 violate the no-later rule.
    At this noise level the regularised curve has no cost elbow at the
    inception; after the drift is removed, the minimum is set by where
    the oscillation-frequency qualification boundary happens to cut the
    scan, which is only loosely coupled to index 500. The thresholds
    state the intended behaviour and are deliberately not widened to
    match the measurement, so this test is expected to fail."""
    config = SyntheticBubbleConfig()
    true_start = config.n_mirror
    final_tau = {}
    for seed in range(20):
        series = synthetic_series(config, seed)
        start = time.perf_counter()
        result = bubble_scan(series, series.log_price.size - 1)
        assert time.perf_counter() - start < 600.0
        final_tau[seed] = result.tau
    hits = sum(1 for tau in final_tau.values() if abs(tau - true_start) <= 60)
    early_tau = {}
    for seed in range(3):
        series = synthetic_series(config, seed)
        early_tau[seed] = bubble_scan(series, 1470).tau
    late = {s: (early_tau[s], final_tau[s]) for s in early_tau
            if early_tau[s] > final_tau[s] + 60}
    detail = f"final tau by seed: {final_tau}; early tau at t2=1470: {early_tau}"
    assert hits >= 16, f"{hits}/20 final estimates within 60 of {true_start}; {detail}"
    assert not late, f"early estimate later than final beyond 60 for {late}; {detail}"


def test_08_sp500_window_start_lands_in_1984():
    """Daily index data is not shipped with the package. When a series
    covering 1981-1987 is supplied (TAUSCAN_SP500_CSV or
    tests/data/sp500.csv), the scan at t2 = 1987-07-15 should start the
    window in 1984 give or take six months, with a positive drift."""
    candidates = []
    env_path = os.environ.get("TAUSCAN_SP500_CSV")
    if env_path:
        candidates.append(Path(env_path))
    candidates.append(Path(__file__).resolve().parent / "data" / "sp500.csv")
    path = next((c for c in candidates if c.is_file()), None)
    if path is None:
        pytest.skip("no daily S&P 500 csv supplied; set TAUSCAN_SP500_CSV "
                    "or add tests/data/sp500.csv")
    series = load_csv(path)
    cutoff = np.datetime64("1987-07-15")
    t2 = int(np.searchsorted(series.dates, cutoff, side="right")) - 1
    if t2 < 0 or series.dates[0] > np.datetime64("1981-12-31"):
        pytest.skip("supplied series does not cover 1981-1987")
    result = bubble_scan(series, t2)
    tau_date = series.date_of(result.tau)
    assert np.datetime64("1983-07-01") <= tau_date <= np.datetime64("1985-06-30")
    assert result.lambda_est.slope > 0.0


# ---------------------------------------------------------------------------
# invariant suite: five properties bundled into one pass/fail


@settings(deadline=None)
@given(st.floats(-1e6, 1e6, allow_nan=False), st.integers(1, 10_000))
def _lambda_zero_is_identity(value, window_len):
    assert chi2_lambda(value, 0.0, window_len) == value


def _zero_estimate_for(curve):
    valid = curve.valid_entries()
    return LambdaEstimate(slope=0.0, intercept=0.0, residual_of_fit=0.0,
                          n_points=len(valid), mode="with-intercept",
                          t2=curve.t2, t1_first=valid[0].t1, t1_last=valid[-1].t1)


@settings(deadline=None)
@given(st.lists(st.integers(1, 1_000_000), min_size=3, max_size=30))
def _zero_slope_keeps_raw_argmin(raw):
    values = [k / 1000.0 for k in raw]
    curve = curve_from_chi2_np(0, values)
    detrended = detrend_curve(curve, _zero_estimate_for(curve))
    for entry in detrended.entries:
        assert entry.chi2_lambda == entry.cost.chi2_np
    best = min(values)
    expected_t1 = next(e.t1 for e, v in zip(curve.entries, values) if v == best)
    assert select_tau(detrended)[0] == expected_t1


@settings(deadline=None)
@given(st.lists(st.integers(10, 10_000), min_size=3, max_size=40))
def _reestimate_after_detrend_is_flat(raw):
    values = [k / 1000.0 for k in raw]
    curve = curve_from_chi2_np(0, values)
    detrended = detrend_curve(curve, estimate_lambda(curve))
    flattened = [e.chi2_lambda for e in detrended.entries]
    # re-estimation needs positive costs; a constant shift leaves the
    # with-intercept slope untouched
    lift = 1.0 + max(abs(v) for v in flattened)
    again = estimate_lambda(curve_from_chi2_np(0, [v + lift for v in flattened]))
    assert abs(again.slope) <= 1e-12


def _curve_with_lambda(values):
    entries = tuple(
        entry_from_chi2_np(0, t1, 1.0, chi2_lambda=v)
        for t1, v in zip(range(-len(values), 0), values)
    )
    return ScanCurve(t2=0, entries=entries)


@settings(deadline=None)
@given(st.lists(st.integers(-1000, 1000), min_size=1, max_size=40),
       st.integers(1, 10_000), st.integers(-10_000, 10_000))
def _affine_rescaling_keeps_argmin(raw, a_raw, b_raw):
    # coarse value grid keeps distinct costs distinct after a*v + b
    values = [k / 100.0 for k in raw]
    a = a_raw / 100.0
    b = b_raw / 100.0
    base = _curve_with_lambda(values)
    scaled = _curve_with_lambda([a * v + b for v in values])
    assert select_tau(scaled)[0] == select_tau(base)[0]


@settings(deadline=None)
@given(st.data())
def _ols_residuals_orthogonal(data):
    n = data.draw(st.integers(2, 60))
    grid_point = st.integers(-10_000, 10_000)
    x = np.array(data.draw(st.lists(grid_point, min_size=n, max_size=n))) / 100.0
    y = np.array(data.draw(st.lists(grid_point, min_size=n, max_size=n))) / 100.0
    assume(float(np.dot(x, x)) > 0.0)
    _, resid = ols_fit(x, y)
    scale = np.linalg.norm(x) * (np.linalg.norm(y) + np.linalg.norm(resid))
    assert abs(float(np.dot(x, resid))) <= 1e-9 * (1.0 + scale)


def _scans_identical_across_jobs():
    series = simulate_change_point(ChangePointConfig(), 0)
    grid = build_grid(t2=1, max_window=202, min_window=4, step=1)
    sequential = run_scan(series, grid, OlsModelFitter(), base_seed=7, jobs=1)
    parallel = run_scan(series, grid, OlsModelFitter(), base_seed=7, jobs=2)
    assert parallel == sequential

    loud = LpplsParams(A=1.8259, B=-0.0094, C1=-0.001, C2=0.005,
                       m=0.44, omega=6.5, tc=330.0)
    bubble = synthetic_series(
        SyntheticBubbleConfig(params=loud, sigma=0.01, n_bubble=300, n_mirror=0), 1)
    lppls_grid = build_grid(t2=299, max_window=280, min_window=160, step=60)
    sequential = run_scan(bubble, lppls_grid, LpplsModelFitter(), base_seed=7, jobs=1)
    parallel = run_scan(bubble, lppls_grid, LpplsModelFitter(), base_seed=7, jobs=2)
    assert parallel == sequential


def test_09_invariant_suite():
    """Five structural properties: a zero drift changes nothing (as a
    scalar identity and through the full detrend-and-select path),
    re-estimating the drift of a detrended curve gives zero, the
    selected start is invariant under positive affine cost rescaling,
    scans are bit-identical across worker counts, and no-intercept OLS
    residuals are orthogonal to the regressor."""
    _lambda_zero_is_identity()
    _zero_slope_keeps_raw_argmin()
    _reestimate_after_detrend_is_flat()
    _affine_rescaling_keeps_argmin()
    _ols_residuals_orthogonal()
    _scans_identical_across_jobs()
