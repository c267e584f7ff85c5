"""Endogenous calibration-window selection for shrinking-window scans.

Fit a model over windows [t1, t2] with t2 fixed and t1 shrinking, then
choose the window start tau that minimises the drift-detrended
normalised cost. The drift slope acting as the regulariser is estimated
from the scan itself, so windows of different lengths become directly
comparable.
"""

from .errors import (
    DegenerateBasisError,
    DegenerateWindowError,
    GridMismatchError,
    InsufficientDataError,
    SeriesError,
    TauscanError,
)
from .linreg import (
    ChangePointConfig,
    McSummary,
    OlsModelFitter,
    monte_carlo_bench,
    ols_fit,
    simulate_change_point,
    simulate_scale_shift,
)
from .lppls import (
    FilterBounds,
    LpplsFit,
    LpplsModelFitter,
    LpplsParams,
    apply_filters,
    bubble_scan,
    fit_nonlinear,
    fit_to_json_dict,
    lppls_eval,
    solve_linear_params,
)
from .metrics import (
    CostTriple,
    LambdaEstimate,
    ScanCurve,
    ScanEntry,
    chi2,
    chi2_lambda,
    chi2_np,
    curve_to_json_dict,
    detrend_curve,
    estimate_lambda,
    normalize_curve,
    select_tau,
    write_curve_csv,
    write_curve_json,
)
from .scan import (
    FitResult,
    ModelFitter,
    ScanGrid,
    ScanResult,
    build_grid,
    endogenise_t1,
    run_scan,
)
from .series import IndexedSeries, PriceSeries, load_csv, write_series_csv
from .synthetic import (
    DEFAULT_BUBBLE_PARAMS,
    SyntheticBubbleConfig,
    bubble_mean_path,
    generate_bubble_path,
    mirror_and_concatenate,
    synthetic_series,
)

__version__ = "0.1.0"

__all__ = [
    "TauscanError", "SeriesError", "InsufficientDataError", "DegenerateWindowError",
    "DegenerateBasisError", "GridMismatchError",
    "IndexedSeries", "PriceSeries", "load_csv", "write_series_csv",
    "CostTriple", "LambdaEstimate", "ScanCurve", "ScanEntry",
    "chi2", "chi2_np", "chi2_lambda", "estimate_lambda", "detrend_curve",
    "select_tau", "normalize_curve", "curve_to_json_dict", "write_curve_csv",
    "write_curve_json",
    "ScanGrid", "ScanResult", "FitResult", "ModelFitter", "build_grid",
    "run_scan", "endogenise_t1",
    "ChangePointConfig", "McSummary", "OlsModelFitter", "ols_fit",
    "simulate_change_point", "simulate_scale_shift", "monte_carlo_bench",
    "FilterBounds", "LpplsParams", "LpplsFit", "LpplsModelFitter",
    "lppls_eval", "solve_linear_params", "fit_nonlinear", "apply_filters",
    "bubble_scan", "fit_to_json_dict",
    "SyntheticBubbleConfig", "DEFAULT_BUBBLE_PARAMS", "bubble_mean_path",
    "generate_bubble_path", "mirror_and_concatenate", "synthetic_series",
    "__version__",
]
