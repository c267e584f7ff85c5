"""Exception types shared across the package."""


class TauscanError(ValueError):
    """Base class for all package-specific errors."""


class SeriesError(TauscanError):
    """Malformed input series (bad CSV, non-monotone dates, non-positive prices)."""


class InsufficientDataError(TauscanError):
    """Requested window or scan does not fit in the available data."""


class DegenerateWindowError(TauscanError):
    """Window too short for the model's parameter count."""


class DegenerateBasisError(TauscanError):
    """Design matrix is rank-deficient beyond recovery (e.g. all-zero regressor)."""


class GridMismatchError(TauscanError):
    """A drift estimate is applied to a scan curve it was not fitted on."""
