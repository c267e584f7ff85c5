"""Synthetic bubble series with a known inception point.

An LPPLS mean path plus Gaussian noise forms the bubble segment; the
first n_mirror points, time-reflected, are prepended so the combined
series switches from a non-accelerating regime into the bubble at a
known index. Dates are decorative weekday labels so the series can flow
through the CSV interfaces; every quantitative statement is in
trading-day indices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import TauscanError
from .lppls import LpplsParams, lppls_eval
from .series import PriceSeries

DEFAULT_BUBBLE_PARAMS = LpplsParams(
    A=1.8259, B=-0.0094, C1=-0.0001, C2=0.0005, m=0.44, omega=6.5, tc=1194.0
)


@dataclass(frozen=True)
class SyntheticBubbleConfig:
    """Generator settings; defaults give a 1100-point bubble, 500-point prefix."""

    params: LpplsParams = DEFAULT_BUBBLE_PARAMS
    sigma: float = 0.03
    n_bubble: int = 1100
    n_mirror: int = 500
    origin: str = field(default="1911-07-01")  # label for the first bubble day

    def __post_init__(self):
        if self.sigma <= 0:
            raise TauscanError("sigma must be positive")
        if not 0 <= self.n_mirror <= self.n_bubble:
            raise TauscanError("need 0 <= n_mirror <= n_bubble")
        if self.n_bubble < 2:
            raise TauscanError("n_bubble must be >= 2")


def _weekday_axis(origin, offsets) -> np.ndarray:
    # weekday labels; a non-weekday origin rolls forward to the next one
    return np.busday_offset(np.datetime64(origin, "D"), offsets, roll="forward")


def bubble_mean_path(config: SyntheticBubbleConfig) -> np.ndarray:
    """Noise-free model log-price over t = 1..n_bubble."""
    if not config.params.tc > config.n_bubble:
        raise TauscanError(
            f"tc ({config.params.tc}) must lie beyond the bubble span ({config.n_bubble})"
        )
    t = np.arange(1, config.n_bubble + 1, dtype=float)
    return lppls_eval(config.params, t)


def generate_bubble_path(config: SyntheticBubbleConfig, seed: int) -> PriceSeries:
    """Bubble segment: mean path plus i.i.d. Gaussian noise of sd sigma.

    One standard-normal draw per time step, in ascending t, from numpy's
    default generator seeded with `seed`; that fixes the seed-to-series
    mapping. Deterministic and bit-reproducible.
    """
    mean = bubble_mean_path(config)
    eps = np.random.default_rng(seed).standard_normal(config.n_bubble)
    dates = _weekday_axis(config.origin, np.arange(config.n_bubble))
    return PriceSeries(dates=dates, log_price=mean + config.sigma * eps)


def mirror_and_concatenate(bubble: PriceSeries, n_mirror: int) -> PriceSeries:
    """Prepend the time-reflection of the first n_mirror points.

    Output index n_mirror - 1 - k holds the same value as bubble index k,
    so the true regime change sits exactly at index n_mirror. The prefix
    reuses the (reflected) noisy values; no fresh noise is drawn.
    """
    if not 0 <= n_mirror <= len(bubble):
        raise TauscanError(f"n_mirror must be in [0, {len(bubble)}], got {n_mirror}")
    if n_mirror == 0:
        return bubble
    values = np.concatenate((bubble.log_price[:n_mirror][::-1], bubble.log_price))
    origin = bubble.dates[0]
    prefix_dates = np.busday_offset(origin, np.arange(-n_mirror, 0), roll="forward")
    dates = np.concatenate((prefix_dates, bubble.dates))
    return PriceSeries(dates=dates, log_price=values)


def synthetic_series(config: SyntheticBubbleConfig, seed: int) -> PriceSeries:
    """Full mirrored series: n_mirror + n_bubble points, inception at n_mirror."""
    return mirror_and_concatenate(generate_bubble_path(config, seed), config.n_mirror)
