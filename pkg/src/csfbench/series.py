"""Price-series primitives: sign sequences, simple returns, windowing, ACF.

All operations are pure and work on float64 arrays; PriceSeries is an
immutable wrapper carrying identity and provenance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSeriesError, InvalidInputError

FAMILIES = ("csf", "ncsf", "random", "real")


@dataclass(frozen=True)
class PriceSeries:
    """Ordered positive price levels with identity and provenance."""

    id: str
    prices: np.ndarray
    source: str = "real"
    meta: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        prices = np.asarray(self.prices, dtype=np.float64)
        object.__setattr__(self, "prices", prices)
        if prices.ndim != 1 or prices.size == 0:
            raise InvalidInputError("prices must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(prices)) or np.any(prices <= 0):
            raise InvalidInputError(f"series {self.id!r}: every price must be finite and > 0")
        if self.source not in FAMILIES:
            raise InvalidInputError(f"unknown source {self.source!r}, expected one of {FAMILIES}")

    def __len__(self) -> int:
        return int(self.prices.size)


@dataclass(frozen=True)
class SignSequence:
    """Up/down step sequence derived from a price window (True = UP)."""

    signs: np.ndarray
    series_id: str = ""
    offset: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "signs", np.asarray(self.signs, dtype=bool))

    def __len__(self) -> int:
        return int(self.signs.size)


@dataclass(frozen=True)
class AcfResult:
    """Sample autocorrelation by lag; values[0] == 1 for non-degenerate input."""

    lags: np.ndarray
    values: np.ndarray


def _as_prices(series) -> np.ndarray:
    if isinstance(series, PriceSeries):
        return series.prices
    prices = np.asarray(series, dtype=np.float64)
    if prices.ndim != 1:
        raise InvalidInputError("expected a 1-D price sequence")
    return prices


def diff_signs(prices, series_id: str = "", offset: int = 0) -> SignSequence:
    """Step signs of a price sequence; a flat step (tie) counts as DOWN.

    The binary up/down alphabet is what every pattern in the vocabulary is
    built from, so the tie rule is fixed here once.
    """
    p = _as_prices(prices)
    if p.size < 2:
        raise InvalidInputError("need at least 2 prices to take step signs")
    if np.any(p <= 0):
        raise InvalidInputError("prices must be positive")
    return SignSequence(signs=p[1:] > p[:-1], series_id=series_id, offset=offset)


def simple_returns(prices) -> np.ndarray:
    """r[i] = p[i+1]/p[i] - 1; output is one shorter than the input."""
    p = _as_prices(prices)
    if p.size < 2:
        raise InvalidInputError("need at least 2 prices to compute returns")
    if np.any(p <= 0):
        raise InvalidInputError("prices must be positive")
    return p[1:] / p[:-1] - 1.0


def windows(series, w: int, stride: int = 1):
    """Yield (offset, prices) for every full window of w consecutive prices.

    A window size larger than the series yields nothing (not an error).
    """
    p = _as_prices(series)
    if w < 2:
        raise InvalidInputError(f"window size must be >= 2, got {w}")
    if stride < 1:
        raise InvalidInputError(f"stride must be >= 1, got {stride}")
    for off in range(0, p.size - w + 1, stride):
        yield off, p[off:off + w]


def autocorrelation(series, max_lag: int, on_returns: bool = False) -> AcfResult:
    """Sample ACF rho(k) = sum (x_t - m)(x_{t+k} - m) / sum (x_t - m)^2.

    Computed on price levels by default (matching the diagnostic plots this
    feeds); pass on_returns=True to correlate simple returns instead.
    """
    x = _as_prices(series)
    if on_returns:
        x = simple_returns(x)
    if max_lag < 0:
        raise InvalidInputError("max_lag must be >= 0")
    if x.size <= max_lag:
        raise InvalidInputError(f"series length {x.size} must exceed max_lag {max_lag}")
    centered = x - x.mean()
    denom = float(np.dot(centered, centered))
    if denom == 0.0:
        raise DegenerateSeriesError("zero-variance series has no autocorrelation")
    values = np.empty(max_lag + 1)
    for k in range(max_lag + 1):
        values[k] = float(np.dot(centered[: x.size - k], centered[k:])) / denom
    return AcfResult(lags=np.arange(max_lag + 1), values=values)
