"""Log-periodic power-law singularity (LPPLS) model and calibration.

The model describes a log-price trajectory accelerating toward a finite
singularity at critical time tc, decorated by log-periodic oscillations:

    ln p(t) = A + B*(tc-t)^m + C1*(tc-t)^m*cos(w*ln(tc-t))
                             + C2*(tc-t)^m*sin(w*ln(tc-t))

Calibration enslaves the linear parameters (A, B, C1, C2) to the
nonlinear triple (tc, m, w): for any candidate triple the linear
subsystem is solved exactly through its normal equations, so the outer
search runs over three dimensions only. The outer search is a
deterministic multi-start simplex descent; candidate fits then pass
through qualification filters before they may enter a scan curve.

The inner cost evaluation and the simplex loop are jit-compiled: a
single window fit costs hundreds of cost evaluations and a scan fits
hundreds of windows, so the per-evaluation constant dominates the
wall-clock of everything built on top.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DegenerateBasisError, InsufficientDataError, TauscanError
from .metrics import STATUS_FAILED, STATUS_OK, STATUS_REJECTED, CostTriple
from .scan import FitResult, ScanGrid, ScanResult, build_grid, endogenise_t1
from .series import PriceSeries

LPPLS_DOF = 8  # 7 model parameters plus the endogenised window start

_BIG = 1e100

# optimizer contract constants
_MAX_ITER = 1000
_FREL = 1e-9


@dataclass(frozen=True)
class FilterBounds:
    """Qualification bounds for a calibrated fit; all comparisons strict."""

    m_lo: float = 0.1
    m_hi: float = 0.9
    omega_lo: float = 6.0
    omega_hi: float = 13.0
    tc_mult: float = 1.0  # tc admissible within t2 +/- tc_mult*(t2-t1)

    def __post_init__(self):
        if not (self.m_lo < self.m_hi and self.omega_lo < self.omega_hi):
            raise TauscanError("filter bounds must satisfy lo < hi")
        if self.tc_mult <= 0:
            raise TauscanError("tc_mult must be positive")


@dataclass(frozen=True)
class LpplsParams:
    """One full parameter vector. tc may lie beyond the fitted window."""

    A: float
    B: float
    C1: float
    C2: float
    m: float
    omega: float
    tc: float

    def __post_init__(self):
        for name in ("A", "B", "C1", "C2", "m", "omega", "tc"):
            if not math.isfinite(getattr(self, name)):
                raise TauscanError(f"parameter {name} must be finite")


def lppls_eval(params: LpplsParams, t):
    """Model log-price at time(s) t. Defined only for t < tc."""
    arr = np.asarray(t, dtype=float)
    if np.any(arr >= params.tc):
        raise TauscanError(f"model undefined at t >= tc ({params.tc})")
    dt = params.tc - arr
    lg = np.log(dt)
    f = np.exp(params.m * lg)
    ang = params.omega * lg
    out = params.A + f * (params.B + params.C1 * np.cos(ang) + params.C2 * np.sin(ang))
    return float(out) if arr.ndim == 0 else out


def _design_matrix(t: np.ndarray, tc: float, m: float, omega: float) -> np.ndarray:
    dt = tc - t
    lg = np.log(dt)
    f = np.exp(m * lg)
    ang = omega * lg
    return np.column_stack((np.ones_like(f), f, f * np.cos(ang), f * np.sin(ang)))


def solve_linear_params(times, y, tc: float, m: float, omega: float) -> tuple:
    """Exact least-squares (A, B, C1, C2) at fixed (tc, m, omega).

    Solves the 4x4 normal equations; when their condition estimate
    exceeds 1e10 the solution is recomputed from an orthogonal
    decomposition of the design matrix instead, which tolerates the
    near-collinear bases that arise for m near 0.

    Raises:
        DegenerateBasisError: rank-deficient basis beyond recovery.
    """
    t = np.asarray(times, dtype=float)
    yv = np.asarray(y, dtype=float)
    if t.ndim != 1 or t.shape != yv.shape:
        raise TauscanError("times and y must be equal-length 1-d vectors")
    if t.size < 5:
        raise TauscanError(f"need at least 5 points, got {t.size}")
    if not tc > t.max():
        raise TauscanError(f"tc ({tc}) must exceed every observation time")
    D = _design_matrix(t, tc, m, omega)
    M = D.T @ D
    b = D.T @ yv
    cond = np.linalg.cond(M)
    if np.isfinite(cond) and cond <= 1e10:
        sol = np.linalg.solve(M, b)
    else:
        sol, _, rank, _ = np.linalg.lstsq(D, yv, rcond=None)
        if rank < 4:
            raise DegenerateBasisError(
                f"LPPLS basis is rank {rank} < 4 (m={m}, omega={omega}, tc={tc})"
            )
    if not np.all(np.isfinite(sol)):
        raise DegenerateBasisError("linear solve produced non-finite coefficients")
    return float(sol[0]), float(sol[1]), float(sol[2]), float(sol[3])


@njit(cache=True)
def _cost_kernel(t, y, tc, m, omega):
    """SSR of the enslaved fit at (tc, m, omega); _BIG when inadmissible.

    The 4x4 normal system is solved by in-place elimination; the cost is
    then recomputed from the solved coefficients, so an ill-conditioned
    solve can only overestimate the cost, never fake a minimum.
    """
    n = t.shape[0]
    if not tc > t[n - 1]:
        return _BIG
    F = np.empty(n)
    C = np.empty(n)
    S = np.empty(n)
    M = np.zeros((4, 4))
    b = np.zeros(4)
    for i in range(n):
        dt = tc - t[i]
        lg = np.log(dt)
        f = np.exp(m * lg)
        ang = omega * lg
        c = f * np.cos(ang)
        s = f * np.sin(ang)
        F[i] = f
        C[i] = c
        S[i] = s
        yi = y[i]
        M[0, 1] += f
        M[0, 2] += c
        M[0, 3] += s
        M[1, 1] += f * f
        M[1, 2] += f * c
        M[1, 3] += f * s
        M[2, 2] += c * c
        M[2, 3] += c * s
        M[3, 3] += s * s
        b[0] += yi
        b[1] += f * yi
        b[2] += c * yi
        b[3] += s * yi
    M[0, 0] = n
    for r in range(1, 4):
        for c_ in range(r):
            M[r, c_] = M[c_, r]
    # partial-pivot elimination on the 4x4
    for col in range(4):
        piv = col
        best = abs(M[col, col])
        for r in range(col + 1, 4):
            v = abs(M[r, col])
            if v > best:
                best = v
                piv = r
        if best == 0.0:
            return _BIG
        if piv != col:
            for c_ in range(4):
                tmp = M[col, c_]
                M[col, c_] = M[piv, c_]
                M[piv, c_] = tmp
            tmp = b[col]
            b[col] = b[piv]
            b[piv] = tmp
        inv = 1.0 / M[col, col]
        for r in range(col + 1, 4):
            fac = M[r, col] * inv
            if fac != 0.0:
                for c_ in range(col, 4):
                    M[r, c_] -= fac * M[col, c_]
                b[r] -= fac * b[col]
    x3 = b[3] / M[3, 3]
    x2 = (b[2] - M[2, 3] * x3) / M[2, 2]
    x1 = (b[1] - M[1, 2] * x2 - M[1, 3] * x3) / M[1, 1]
    x0 = (b[0] - M[0, 1] * x1 - M[0, 2] * x2 - M[0, 3] * x3) / M[0, 0]
    if not (np.isfinite(x0) and np.isfinite(x1) and np.isfinite(x2) and np.isfinite(x3)):
        return _BIG
    sse = 0.0
    for i in range(n):
        r_ = y[i] - x0 - x1 * F[i] - x2 * C[i] - x3 * S[i]
        sse += r_ * r_
    if not np.isfinite(sse):
        return _BIG
    return sse


@njit(cache=True)
def _objective(t, y, x, lo, hi):
    # graded penalty outside the search box keeps the simplex informed
    viol = 0.0
    for k in range(3):
        width = hi[k] - lo[k]
        if x[k] < lo[k]:
            viol += (lo[k] - x[k]) / width
        elif x[k] > hi[k]:
            viol += (x[k] - hi[k]) / width
    if viol > 0.0:
        return _BIG * (1.0 + viol)
    return _cost_kernel(t, y, x[0], x[1], x[2])


@njit(cache=True)
def _nm_polish(t, y, x0, steps, lo, hi, max_iter, frel):
    """Nelder-Mead descent over (tc, m, omega).

    Stops when the simplex cost spread falls below frel relative to the
    best cost, or after max_iter iterations. Returns
    (tc, m, omega, best_cost, converged_flag, n_iter).
    """
    ndim = 3
    npts = 4
    sx = np.empty((npts, ndim))
    fv = np.empty(npts)
    for j in range(ndim):
        sx[0, j] = x0[j]
    fv[0] = _objective(t, y, sx[0], lo, hi)
    for i in range(ndim):
        for j in range(ndim):
            sx[i + 1, j] = x0[j]
        sx[i + 1, i] = x0[i] + steps[i]
        fv[i + 1] = _objective(t, y, sx[i + 1], lo, hi)
    it = 0
    converged = False
    while it < max_iter:
        # insertion sort: tiny n, fully deterministic ordering
        for i in range(1, npts):
            fk = fv[i]
            xk0 = sx[i, 0]
            xk1 = sx[i, 1]
            xk2 = sx[i, 2]
            j = i - 1
            while j >= 0 and fv[j] > fk:
                fv[j + 1] = fv[j]
                sx[j + 1, 0] = sx[j, 0]
                sx[j + 1, 1] = sx[j, 1]
                sx[j + 1, 2] = sx[j, 2]
                j -= 1
            fv[j + 1] = fk
            sx[j + 1, 0] = xk0
            sx[j + 1, 1] = xk1
            sx[j + 1, 2] = xk2
        if fv[npts - 1] - fv[0] <= frel * (abs(fv[0]) + 1e-300):
            converged = True
            break
        it += 1
        # centroid of all but the worst
        cen = np.zeros(ndim)
        for i in range(npts - 1):
            for j in range(ndim):
                cen[j] += sx[i, j]
        for j in range(ndim):
            cen[j] /= npts - 1
        xr = np.empty(ndim)
        for j in range(ndim):
            xr[j] = cen[j] + (cen[j] - sx[npts - 1, j])
        fr = _objective(t, y, xr, lo, hi)
        if fr < fv[0]:
            xe = np.empty(ndim)
            for j in range(ndim):
                xe[j] = cen[j] + 2.0 * (cen[j] - sx[npts - 1, j])
            fe = _objective(t, y, xe, lo, hi)
            if fe < fr:
                for j in range(ndim):
                    sx[npts - 1, j] = xe[j]
                fv[npts - 1] = fe
            else:
                for j in range(ndim):
                    sx[npts - 1, j] = xr[j]
                fv[npts - 1] = fr
        elif fr < fv[npts - 2]:
            for j in range(ndim):
                sx[npts - 1, j] = xr[j]
            fv[npts - 1] = fr
        else:
            # contraction, outside or inside of the worst point
            if fr < fv[npts - 1]:
                xc = np.empty(ndim)
                for j in range(ndim):
                    xc[j] = cen[j] + 0.5 * (xr[j] - cen[j])
                fc = _objective(t, y, xc, lo, hi)
                accept = fc <= fr
            else:
                xc = np.empty(ndim)
                for j in range(ndim):
                    xc[j] = cen[j] + 0.5 * (sx[npts - 1, j] - cen[j])
                fc = _objective(t, y, xc, lo, hi)
                accept = fc < fv[npts - 1]
            if accept:
                for j in range(ndim):
                    sx[npts - 1, j] = xc[j]
                fv[npts - 1] = fc
            else:
                # shrink toward the best vertex
                for i in range(1, npts):
                    for j in range(ndim):
                        sx[i, j] = sx[0, j] + 0.5 * (sx[i, j] - sx[0, j])
                    fv[i] = _objective(t, y, sx[i], lo, hi)
    # final ordering pass so index 0 is the best vertex
    bi = 0
    for i in range(1, npts):
        if fv[i] < fv[bi]:
            bi = i
    return sx[bi, 0], sx[bi, 1], sx[bi, 2], fv[bi], converged, it


def _start_grid(t2: float, span: float) -> list:
    # deterministic coarse net over the admissible cone behind tc
    starts = []
    for m0 in (0.2, 0.4, 0.6, 0.8):
        for w0 in (7.0, 9.0, 11.0):
            for dtc in (5.0, 0.25 * span, 0.5 * span):
                starts.append((t2 + dtc, m0, w0))
    return starts


@dataclass(frozen=True)
class LpplsFit:
    """Outcome of one window calibration."""

    params: LpplsParams | None
    cost: CostTriple | None
    filter_pass: bool
    optimizer_status: str  # converged | max_iter | degenerate
    t1: int
    t2: int

    def __post_init__(self):
        if self.optimizer_status not in ("converged", "max_iter", "degenerate"):
            raise TauscanError(f"unknown optimizer status {self.optimizer_status!r}")
        if self.optimizer_status != "degenerate" and self.params is None:
            raise TauscanError("non-degenerate fit must carry parameters")


def _triple_qualifies(tc: float, m: float, omega: float, t1: float, t2: float,
                      bounds: FilterBounds) -> bool:
    d = bounds.tc_mult * (t2 - t1)
    return (
        bounds.m_lo < m < bounds.m_hi
        and bounds.omega_lo < omega < bounds.omega_hi
        and t2 - d < tc < t2 + d
    )


def apply_filters(params: LpplsParams, window: tuple, bounds: FilterBounds | None = None) -> bool:
    """Strict-inequality qualification of a fitted parameter vector."""
    if bounds is None:
        bounds = FilterBounds()
    t1, t2 = window
    return _triple_qualifies(params.tc, params.m, params.omega, t1, t2, bounds)


def fit_nonlinear(times, y, bounds: FilterBounds | None = None, n_starts: int = 6,
                  seed: int = 0) -> LpplsFit:
    """Multi-start calibration of (tc, m, omega) with enslaved linear part.

    The start net is a fixed grid of 36 (tc, m, omega) triples spanned by
    the window; every start is cost-screened and the best n_starts are
    polished by simplex descent (stable ordering, so the whole procedure
    is deterministic; `seed` is accepted for fitter-protocol uniformity
    and does not influence the search). The returned fit is the lowest
    polished minimum; the qualification filters then judge it.

    The search box is asymmetric around the qualification bounds, and
    deliberately so. Above and to the slow-oscillation side it pads
    outward (m up to 1.2, omega down to 5, tc up to 1.5 window lengths
    past the end) so a descent is free to express a disqualifying
    shape: a straight line drifts to m near 1 with runaway tc, a
    non-oscillatory regime drains below omega = 6, and the filters
    flag both. The m floor, in contrast, sits exactly at the
    qualification bound: below 0.1 the power-law column flattens toward
    the intercept and the model gains spurious effective freedom that
    undercuts every physical shape on noisy data, so searching there
    manufactures minima that carry no information and would only mask
    the admissible optimum. A fit pinned against that floor stays
    subject to the strict filters like any other.

    Raises:
        InsufficientDataError: if the segment has fewer than 30 points.
    """
    if bounds is None:
        bounds = FilterBounds()
    t = np.asarray(times, dtype=float)
    yv = np.asarray(y, dtype=float)
    if t.ndim != 1 or t.shape != yv.shape:
        raise TauscanError("times and y must be equal-length 1-d vectors")
    if t.size < 30:
        raise InsufficientDataError(f"LPPLS calibration needs >= 30 points, got {t.size}")
    if n_starts < 1:
        raise TauscanError(f"n_starts must be >= 1, got {n_starts}")
    t1_i = int(round(t[0]))
    t2_i = int(round(t[-1]))
    t2f = t[-1]
    span = t2f - t[0]
    lo = np.array([t2f + 1e-2, bounds.m_lo, bounds.omega_lo - 1.0])
    hi = np.array([t2f + 1.5 * span, bounds.m_hi + 0.3, bounds.omega_hi + 1.0])
    steps = np.array([max(2.0, 0.05 * span), 0.08, 0.5])
    starts = _start_grid(t2f, span)
    screen = np.array([_objective(t, yv, np.array(s), lo, hi) for s in starts])
    order = np.lexsort((np.arange(len(starts)), screen))
    picked = [i for i in order[: max(n_starts, 1)] if screen[i] < _BIG]
    best = None
    for i in picked:
        tc_b, m_b, w_b, f_b, conv, _ = _nm_polish(
            t, yv, np.array(starts[i]), steps, lo, hi, _MAX_ITER, _FREL
        )
        if f_b >= _BIG:
            continue
        # restart with a fresh, smaller simplex; a collapsed one can stall
        # short of the valley floor on wall-pinned or narrow basins
        tc_r, m_r, w_r, f_r, conv_r, _ = _nm_polish(
            t, yv, np.array([tc_b, m_b, w_b]), steps * 0.25, lo, hi, _MAX_ITER, _FREL
        )
        if f_r < f_b:
            tc_b, m_b, w_b, f_b, conv = tc_r, m_r, w_r, f_r, conv_r
        if best is None or f_b < best[3]:
            best = (tc_b, m_b, w_b, f_b, bool(conv))
    if best is None:
        return LpplsFit(params=None, cost=None, filter_pass=False,
                        optimizer_status="degenerate", t1=t1_i, t2=t2_i)
    tc_b, m_b, w_b, _, conv = best
    try:
        A, B, C1, C2 = solve_linear_params(t, yv, tc_b, m_b, w_b)
    except (DegenerateBasisError, TauscanError):
        return LpplsFit(params=None, cost=None, filter_pass=False,
                        optimizer_status="degenerate", t1=t1_i, t2=t2_i)
    params = LpplsParams(A=A, B=B, C1=C1, C2=C2, m=m_b, omega=w_b, tc=tc_b)
    resid = yv - lppls_eval(params, t)
    cost = CostTriple.from_residuals(resid, LPPLS_DOF)
    return LpplsFit(
        params=params,
        cost=cost,
        filter_pass=apply_filters(params, (t1_i, t2_i), bounds),
        optimizer_status="converged" if conv else "max_iter",
        t1=t1_i,
        t2=t2_i,
    )


@dataclass(frozen=True)
class LpplsModelFitter:
    """ModelFitter adapter running the full multi-start calibration. p = 8."""

    bounds: FilterBounds = FilterBounds()
    n_starts: int = 6
    degrees_of_freedom: int = LPPLS_DOF

    def fit(self, t, y, seed: int) -> FitResult:
        fit = fit_nonlinear(t, y, bounds=self.bounds, n_starts=self.n_starts, seed=seed)
        if fit.params is None:
            return FitResult(payload=fit, residuals=None, status=STATUS_FAILED,
                             message="no admissible optimum")
        resid = np.asarray(y, dtype=float) - lppls_eval(fit.params, np.asarray(t, dtype=float))
        status = STATUS_OK if fit.filter_pass else STATUS_REJECTED
        return FitResult(payload=fit, residuals=resid, status=status)


def bubble_scan(series, t2, grid: ScanGrid | None = None,
                bounds: FilterBounds | None = None, n_starts: int = 6,
                lambda_mode: str = "zero-intercept", base_seed: int = 0,
                jobs: int = 1) -> ScanResult:
    """Endogenise the window start of an LPPLS scan at pseudo-present t2.

    t2 may be an integer index or, for a dated series, a calendar date
    present in it. The default grid shrinks from 1600 observations (or
    the available history, whichever is shorter) down to 30 in steps
    of 3. Windows whose fit fails qualification are kept in the curve
    but excluded from the drift estimate and the minimisation.

    The drift is estimated in index-abscissa (zero-intercept) mode by
    default: the regularised cost then penalises short windows at the
    scale of the cost level itself, not of the residual drift, which is
    what keeps the minimiser away from the overfit-favoured small
    windows when the cost curve carries no sharp misfit elbow.
    """
    if isinstance(t2, (int, np.integer)):
        t2_idx = int(t2)
    else:
        if not isinstance(series, PriceSeries):
            raise TauscanError("a calendar t2 needs a dated series")
        t2_idx = series.index_of(t2)
    indexed = series.as_indexed() if hasattr(series, "as_indexed") else series
    if grid is None:
        available = t2_idx - indexed.start + 1
        max_window = min(1600, available)
        if max_window < 30:
            raise InsufficientDataError(
                f"only {available} observations up to t2; need at least 30"
            )
        grid = build_grid(t2_idx, max_window, 30, 3)
    fitter = LpplsModelFitter(bounds=bounds or FilterBounds(), n_starts=n_starts)
    return endogenise_t1(indexed, grid, fitter, lambda_mode=lambda_mode,
                         base_seed=base_seed, jobs=jobs)


def fit_to_json_dict(fit: LpplsFit, calendar: PriceSeries | None = None) -> dict:
    """Fixed-schema dict for one fit; tc_date added when a calendar is given."""
    p = fit.params
    doc = {
        "t1": fit.t1,
        "t2": fit.t2,
        "A": None if p is None else p.A,
        "B": None if p is None else p.B,
        "C1": None if p is None else p.C1,
        "C2": None if p is None else p.C2,
        "m": None if p is None else p.m,
        "omega": None if p is None else p.omega,
        "tc": None if p is None else p.tc,
        "chi2": None if fit.cost is None else fit.cost.chi2,
        "chi2_np": None if fit.cost is None else fit.cost.chi2_np,
        "filter_pass": fit.filter_pass,
        "status": fit.optimizer_status,
    }
    if calendar is not None and p is not None:
        last = len(calendar) - 1
        idx = int(round(p.tc))
        if 0 <= idx <= last:
            doc["tc_date"] = str(calendar.date_of(idx))
        else:
            # weekday extrapolation beyond the observed calendar; approximate
            doc["tc_date"] = str(np.busday_offset(calendar.date_of(last),
                                                  idx - last, roll="forward"))
    return doc
