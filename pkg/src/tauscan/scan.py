"""Shrinking-window scan engine.

For a fixed pseudo-present t2, fit a model over a grid of window starts
t1 and assemble the costs into a ScanCurve. The engine is model-agnostic:
anything implementing the ModelFitter protocol can be scanned.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from .errors import DegenerateWindowError, InsufficientDataError, TauscanError
from .metrics import (
    STATUS_FAILED,
    STATUS_OK,
    CostTriple,
    LambdaEstimate,
    ScanCurve,
    ScanEntry,
    detrend_curve,
    estimate_lambda,
    select_tau,
)
from .series import IndexedSeries


@dataclass(frozen=True)
class ScanGrid:
    """Window starts t1 for a fixed t2, all windows at least min_window long."""

    t2: int
    t1_values: tuple
    min_window: int
    step: int

    def __post_init__(self):
        t1s = tuple(int(v) for v in self.t1_values)
        if not t1s:
            raise TauscanError("grid has no windows")
        for a, b in zip(t1s, t1s[1:]):
            if b - a != self.step:
                raise TauscanError("t1_values must increase by exactly `step`")
        if any(self.t2 - t1 + 1 < self.min_window for t1 in t1s):
            raise TauscanError("grid contains a window shorter than min_window")
        object.__setattr__(self, "t1_values", t1s)

    def __len__(self) -> int:
        return len(self.t1_values)

    def window_lengths(self) -> tuple:
        return tuple(self.t2 - t1 + 1 for t1 in self.t1_values)


def build_grid(t2: int, max_window: int, min_window: int, step: int = 1) -> ScanGrid:
    """Grid of window lengths min_window, min_window+step, ... up to max_window.

    Lengths anchor on t2 and grow backward, so the shortest window is
    always present and the longest is included only where alignment
    permits (max_window itself may be skipped when the step does not
    divide the range).
    """
    if step < 1:
        raise TauscanError(f"step must be >= 1, got {step}")
    if min_window < 3:
        raise TauscanError(f"min_window must be >= 3, got {min_window}")
    if max_window < min_window:
        raise TauscanError(
            f"max_window ({max_window}) must be >= min_window ({min_window})"
        )
    lengths = range(min_window, max_window + 1, step)
    t1s = tuple(t2 - length + 1 for length in reversed(lengths))
    return ScanGrid(t2=t2, t1_values=t1s, min_window=min_window, step=step)


@dataclass(frozen=True)
class FitResult:
    """What a ModelFitter returns for one window."""

    payload: object = None
    residuals: np.ndarray | None = None
    status: str = STATUS_OK
    message: str = ""


@runtime_checkable
class ModelFitter(Protocol):
    """Per-window model fit. Must be deterministic given (t, y, seed)."""

    degrees_of_freedom: int

    def fit(self, t: np.ndarray, y: np.ndarray, seed: int) -> FitResult:
        ...


def _window_seed(base_seed: int, t1: int) -> int:
    # stable per-window seed independent of scan order and parallelism
    ss = np.random.SeedSequence(entropy=(int(base_seed), int(t1) + 2**32))
    return int(ss.generate_state(1, np.uint64)[0])


def _as_indexed(series) -> IndexedSeries:
    if isinstance(series, IndexedSeries):
        return series
    if hasattr(series, "as_indexed"):
        return series.as_indexed()
    raise TauscanError(f"cannot scan over a {type(series).__name__}")


def _fit_window(args):
    values, start, t1, t2, fitter, seed = args
    sub = IndexedSeries(values, start=start)
    t, y = sub.window(t1, t2)
    return t1, fitter.fit(t, y, seed)


def run_scan(series, grid: ScanGrid, fitter, base_seed: int = 0, jobs: int = 1) -> ScanCurve:
    """Fit every grid window and assemble the ScanCurve in t1 order.

    Failed or filter-rejected fits are kept as flagged entries rather
    than dropped, so the curve always has one entry per grid window.
    Entries are assembled in t1 order whatever the execution order, and
    per-window seeds depend only on (base_seed, t1), so the result is
    identical at any parallelism level.
    """
    indexed = _as_indexed(series)
    p = int(fitter.degrees_of_freedom)
    if grid.min_window < p + 2:
        raise DegenerateWindowError(
            f"min_window {grid.min_window} leaves no headroom over p={p}; need >= p+2"
        )
    t1_min = grid.t1_values[0]
    if t1_min < indexed.start or grid.t2 > indexed.end:
        raise InsufficientDataError(
            f"series [{indexed.start}, {indexed.end}] does not cover "
            f"scan range [{t1_min}, {grid.t2}]"
        )
    tasks = [
        (indexed.values, indexed.start, t1, grid.t2, fitter, _window_seed(base_seed, t1))
        for t1 in grid.t1_values
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunk = max(1, len(tasks) // (4 * jobs))
            results = dict(pool.map(_fit_window, tasks, chunksize=chunk))
    else:
        results = dict(map(_fit_window, tasks))
    entries = []
    for t1 in grid.t1_values:
        res = results[t1]
        window_len = grid.t2 - t1 + 1
        if res.residuals is None:
            if res.status == STATUS_OK:
                raise TauscanError("fitter returned ok status without residuals")
            entries.append(ScanEntry(t1=t1, window_len=window_len, cost=None,
                                     payload=res.payload, status=STATUS_FAILED))
        else:
            cost = CostTriple.from_residuals(res.residuals, p)
            entries.append(ScanEntry(t1=t1, window_len=window_len, cost=cost,
                                     payload=res.payload, status=res.status))
    return ScanCurve(t2=grid.t2, entries=tuple(entries))


@dataclass(frozen=True)
class ScanResult:
    """Endogenised window start plus every intermediate, for audit."""

    tau: int
    tau_value: float
    lambda_est: LambdaEstimate
    curve: ScanCurve


def endogenise_t1(series, grid: ScanGrid, fitter, lambda_mode: str = "with-intercept",
                  base_seed: int = 0, jobs: int = 1) -> ScanResult:
    """Scan, estimate the drift, detrend, and pick the cost-minimising t1."""
    curve = run_scan(series, grid, fitter, base_seed=base_seed, jobs=jobs)
    lambda_est = estimate_lambda(curve, mode=lambda_mode)
    detrended = detrend_curve(curve, lambda_est)
    tau, tau_value = select_tau(detrended)
    return ScanResult(tau=tau, tau_value=tau_value, lambda_est=lambda_est, curve=detrended)
