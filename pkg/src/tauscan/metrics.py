"""Cost metrics and the empirical drift regulariser.

Three costs are attached to every fitted window: the sum of squared
residuals ``chi2``, its per-degree-of-freedom normalisation ``chi2_np``,
and the regularised ``chi2_lambda`` obtained by subtracting an
empirically estimated linear drift in window length. The drift slope
prices window length into the cost: it is chosen so that the detrended
cost has zero average drift across the scan, which makes windows of
different lengths directly comparable.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    DegenerateWindowError,
    GridMismatchError,
    InsufficientDataError,
    TauscanError,
)

STATUS_OK = "ok"
STATUS_REJECTED = "rejected"
STATUS_FAILED = "failed"

LAMBDA_MODES = ("with-intercept", "zero-intercept")


def chi2(residuals) -> float:
    """Sum of squared residuals.

    Raises:
        DegenerateWindowError: on an empty residual vector.
        TauscanError: on non-finite residuals.
    """
    r = np.asarray(residuals, dtype=float)
    if r.size == 0:
        raise DegenerateWindowError("empty residual vector")
    if not np.all(np.isfinite(r)):
        raise TauscanError("residuals must be finite")
    return float(np.dot(r, r))


def chi2_np(residuals, p: int) -> float:
    """Normalised cost chi2 / (n - p).

    Raises:
        DegenerateWindowError: if the window has n <= p points.
    """
    r = np.asarray(residuals, dtype=float)
    if p < 1:
        raise TauscanError(f"p must be >= 1, got {p}")
    if r.size <= p:
        raise DegenerateWindowError(
            f"window of {r.size} points cannot normalise a {p}-parameter fit"
        )
    return chi2(r) / (r.size - p)


@dataclass(frozen=True)
class CostTriple:
    """chi2 and chi2_np for one fitted window of n points and p parameters."""

    chi2: float
    chi2_np: float
    n: int
    p: int

    def __post_init__(self):
        if self.p < 1 or self.n <= self.p:
            raise DegenerateWindowError(f"need n > p >= 1, got n={self.n}, p={self.p}")
        if not (np.isfinite(self.chi2) and self.chi2 >= 0):
            raise TauscanError(f"chi2 must be finite and nonnegative, got {self.chi2}")
        expected = self.chi2 / (self.n - self.p)
        if abs(self.chi2_np - expected) > 1e-14 * max(1.0, abs(expected)):
            raise TauscanError("chi2_np inconsistent with chi2 / (n - p)")

    @classmethod
    def from_residuals(cls, residuals, p: int) -> "CostTriple":
        r = np.asarray(residuals, dtype=float)
        return cls(chi2=chi2(r), chi2_np=chi2_np(r, p), n=r.size, p=p)


@dataclass(frozen=True)
class ScanEntry:
    """One window of a scan curve.

    status is "ok" for a usable fit, "rejected" for a fit that failed a
    model qualification filter (cost present but excluded from selection),
    and "failed" when no cost could be produced at all.
    """

    t1: int
    window_len: int
    cost: CostTriple | None = None
    payload: object = None
    status: str = STATUS_OK
    chi2_lambda: float | None = None

    def __post_init__(self):
        if self.status not in (STATUS_OK, STATUS_REJECTED, STATUS_FAILED):
            raise TauscanError(f"unknown entry status {self.status!r}")
        if self.status == STATUS_OK and self.cost is None:
            raise TauscanError("an ok entry must carry a cost")
        if self.cost is not None and self.cost.n != self.window_len:
            raise TauscanError(
                f"cost computed on {self.cost.n} points but window_len={self.window_len}"
            )


@dataclass(frozen=True)
class ScanCurve:
    """Costs of all windows sharing one pseudo-present t2, ordered by t1."""

    t2: int
    entries: tuple

    def __post_init__(self):
        entries = tuple(self.entries)
        if not entries:
            raise TauscanError("a scan curve needs at least one entry")
        t1s = [e.t1 for e in entries]
        if any(b <= a for a, b in zip(t1s, t1s[1:])):
            raise TauscanError("entries must be strictly ordered by t1 ascending")
        for e in entries:
            if e.window_len != self.t2 - e.t1 + 1:
                raise TauscanError(
                    f"entry t1={e.t1} has window_len={e.window_len}, "
                    f"expected {self.t2 - e.t1 + 1}"
                )
        object.__setattr__(self, "entries", entries)

    def __len__(self) -> int:
        return len(self.entries)

    def valid_entries(self) -> tuple:
        return tuple(e for e in self.entries if e.status == STATUS_OK)


@dataclass(frozen=True)
class LambdaEstimate:
    """Empirical drift of chi2_np across a scan, used as the regulariser.

    slope is the drift per unit of the regression abscissa: window length
    in with-intercept mode, scan position in zero-intercept mode. The
    grid fields record where the estimate came from so that applying it
    to a different curve is caught as an error.
    """

    slope: float
    intercept: float
    residual_of_fit: float
    n_points: int
    mode: str
    t2: int
    t1_first: int
    t1_last: int

    def as_dict(self) -> dict:
        return {
            "lambda": self.slope,
            "intercept": self.intercept,
            "residual_of_fit": self.residual_of_fit,
            "n_points": self.n_points,
            "mode": self.mode,
        }


def estimate_lambda(curve: ScanCurve, mode: str = "with-intercept") -> LambdaEstimate:
    """Least-squares drift of chi2_np across the scan.

    with-intercept mode regresses chi2_np on window length with a free
    intercept, so a flat curve gives slope 0 exactly. zero-intercept mode
    forces the line through the origin and regresses on scan position
    (0, 1, 2, ...), reproducing the behaviour of simple reference
    implementations that fit against the raw array index.

    Raises:
        InsufficientDataError: fewer than 3 usable entries.
    """
    if mode not in LAMBDA_MODES:
        raise TauscanError(f"unknown lambda mode {mode!r}; expected one of {LAMBDA_MODES}")
    valid = curve.valid_entries()
    if len(valid) < 3:
        raise InsufficientDataError(
            f"lambda estimation needs >= 3 usable windows, got {len(valid)}"
        )
    y = np.array([e.cost.chi2_np for e in valid])
    if not np.all(np.isfinite(y)):
        raise TauscanError("chi2_np values must be finite for lambda estimation")
    if mode == "with-intercept":
        x = np.array([float(e.window_len) for e in valid])
        xm = x - x.mean()
        slope = float(np.dot(xm, y) / np.dot(xm, xm))
        intercept = float(y.mean() - slope * x.mean())
        resid = y - (slope * x + intercept)
    else:
        x = np.arange(len(valid), dtype=float)
        slope = float(np.dot(x, y) / np.dot(x, x))
        intercept = 0.0
        resid = y - slope * x
    return LambdaEstimate(
        slope=slope,
        intercept=intercept,
        residual_of_fit=float(np.dot(resid, resid)),
        n_points=len(valid),
        mode=mode,
        t2=curve.t2,
        t1_first=valid[0].t1,
        t1_last=valid[-1].t1,
    )


def chi2_lambda(chi2_np_value: float, lam: float, window_len: int) -> float:
    """Regularised cost: chi2_np minus the drift attributed to window length."""
    if window_len <= 0:
        raise TauscanError(f"window_len must be positive, got {window_len}")
    if not (np.isfinite(chi2_np_value) and np.isfinite(lam)):
        raise TauscanError("chi2_np and lambda must be finite")
    return chi2_np_value - lam * window_len


def detrend_curve(curve: ScanCurve, lambda_est: LambdaEstimate) -> ScanCurve:
    """Attach chi2_lambda to every entry that carries a cost.

    Raises:
        GridMismatchError: if the estimate was fitted on a different scan.
    """
    valid = curve.valid_entries()
    if (
        lambda_est.t2 != curve.t2
        or lambda_est.n_points != len(valid)
        or (valid and (lambda_est.t1_first != valid[0].t1 or lambda_est.t1_last != valid[-1].t1))
    ):
        raise GridMismatchError(
            "lambda estimate was fitted on a different scan grid than this curve"
        )
    out = []
    for e in curve.entries:
        if e.cost is None:
            out.append(e)
        else:
            out.append(replace(
                e, chi2_lambda=chi2_lambda(e.cost.chi2_np, lambda_est.slope, e.window_len)
            ))
    return ScanCurve(t2=curve.t2, entries=tuple(out))


def select_tau(curve: ScanCurve) -> tuple[int, float]:
    """Window start minimising the regularised cost.

    Ties are broken toward the earliest t1, i.e. the largest window: the
    whole point of the regulariser is to stop short windows winning by
    overfitting, so on equal footing the longer history is preferred.

    Returns:
        (tau, min_value)
    """
    best_t1 = None
    best_val = None
    for e in curve.entries:
        if e.status != STATUS_OK or e.chi2_lambda is None:
            continue
        if best_val is None or e.chi2_lambda < best_val:
            best_t1, best_val = e.t1, e.chi2_lambda
    if best_t1 is None:
        raise InsufficientDataError("no usable regularised entries to select from")
    return best_t1, float(best_val)


def normalize_curve(values) -> np.ndarray:
    """Divide by the maximum value, for plot emission only."""
    v = np.asarray(values, dtype=float)
    if v.size == 0 or not np.all(np.isfinite(v)):
        raise TauscanError("normalisation needs a nonempty finite vector")
    m = v.max()
    if m == 0.0:
        raise TauscanError("cannot normalise: maximum value is zero")
    return v / m


def write_curve_csv(curve: ScanCurve, path) -> None:
    """Fixed-format CSV of a scan curve, one row per window."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t1", "window_len", "chi2", "chi2_np", "chi2_lambda", "status"])
        for e in curve.entries:
            c2 = repr(e.cost.chi2) if e.cost is not None else ""
            c2n = repr(e.cost.chi2_np) if e.cost is not None else ""
            c2l = repr(e.chi2_lambda) if e.chi2_lambda is not None else ""
            w.writerow([e.t1, e.window_len, c2, c2n, c2l, e.status])


def curve_to_json_dict(curve: ScanCurve, lambda_est: LambdaEstimate | None = None) -> dict:
    doc = {
        "t2": curve.t2,
        "entries": [
            {
                "t1": e.t1,
                "window_len": e.window_len,
                "chi2": None if e.cost is None else e.cost.chi2,
                "chi2_np": None if e.cost is None else e.cost.chi2_np,
                "chi2_lambda": e.chi2_lambda,
                "status": e.status,
            }
            for e in curve.entries
        ],
    }
    if lambda_est is not None:
        doc["lambda_estimate"] = lambda_est.as_dict()
    return doc


def write_curve_json(curve: ScanCurve, path, lambda_est: LambdaEstimate | None = None) -> None:
    with open(path, "w") as fh:
        json.dump(curve_to_json_dict(curve, lambda_est), fh, indent=2)
        fh.write("\n")
