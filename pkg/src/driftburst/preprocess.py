"""Price series construction: tick sampling, pre-averaging, log-returns and the
intraday periodicity profile used to normalize selling pressure."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import US, DayTape


@dataclass(frozen=True)
class PriceSeries:
    """Log-prices at strictly increasing instants (seconds since the open)."""

    times: np.ndarray
    logp: np.ndarray
    preaveraged: bool = False

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        p = np.asarray(self.logp, dtype=float)
        if t.shape != p.shape or t.ndim != 1:
            raise ValueError("times and logp must be 1-d arrays of equal length")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("instants must be strictly increasing")
        if not np.all(np.isfinite(p)):
            raise ValueError("log-prices must be finite")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "logp", p)

    def __len__(self) -> int:
        return self.times.size

    @classmethod
    def from_prices(cls, times, prices) -> "PriceSeries":
        return cls(np.asarray(times, dtype=float), np.log(np.asarray(prices, dtype=float)))


def transaction_series(tape: DayTape) -> PriceSeries:
    """Log transaction prices; trades sharing a microsecond keep the last one in file order."""
    ts = tape.trade_ts
    if ts.size == 0:
        return PriceSeries(np.zeros(0), np.zeros(0))
    last = np.r_[ts[1:] != ts[:-1], True]
    return PriceSeries(ts[last] / US, np.log(tape.price[last]))


def preaverage_weights(window: int) -> np.ndarray:
    """Normalized triangular weights g(j/(window+1)), j = 1..window, g(x) = min(x, 1-x)."""
    if window < 1:
        raise ValueError("window must be >= 1")
    x = np.arange(1, window + 1) / (window + 1)
    g = np.minimum(x, 1.0 - x)
    return g / g.sum()


def preaverage(raw: PriceSeries, window: int = 5) -> PriceSeries:
    """Triangular local average of ``window`` consecutive log-prices, stamped at
    the last instant of each window. Output length is ``len(raw) - window + 1``."""
    w = preaverage_weights(window)
    if len(raw) < window:
        raise ValueError(f"series of length {len(raw)} shorter than window {window}")
    if window == 1:
        return PriceSeries(raw.times.copy(), raw.logp.copy(), preaveraged=True)
    # np.convolve flips its second argument; the weights are symmetric anyway
    smoothed = np.convolve(raw.logp, w[::-1], mode="valid")
    return PriceSeries(raw.times[window - 1:], smoothed, preaveraged=True)


def log_returns(series: PriceSeries) -> tuple[np.ndarray, np.ndarray]:
    """Returns ``(end_times, r)`` with ``r[i] = p[i+1] - p[i]``."""
    if len(series) < 2:
        raise ValueError("need at least two prices")
    return series.times[1:], np.diff(series.logp)


@dataclass(frozen=True)
class PeriodicityProfile:
    """Per-minute multiplicative factor; NaN marks minutes excluded downstream."""

    stock: str
    factor: np.ndarray

    def defined(self) -> np.ndarray:
        return np.isfinite(self.factor)


def periodicity_profile(raw_sp: np.ndarray, stock: str = "") -> PeriodicityProfile:
    """Factor per minute from a (days, minutes) array of raw selling pressure.

    The factor is the reciprocal of the absolute mean across days, so that the
    normalized value keeps the sign of the raw one. Missing observations are NaN;
    a minute with no observations or a zero mean gets a NaN factor.
    """
    a = np.atleast_2d(np.asarray(raw_sp, dtype=float))
    count = np.sum(np.isfinite(a), axis=0)
    total = np.nansum(a, axis=0)
    factor = np.full(a.shape[1], np.nan)
    ok = (count > 0) & (total != 0)
    factor[ok] = count[ok] / np.abs(total[ok])
    return PeriodicityProfile(stock, factor)
