"""Drift-burst statistic, critical values and event segmentation.

The statistic at instant ``t`` is ``sqrt(h_mu / K2) * mu_t / sigma_t`` where
``mu_t`` and ``sigma_t`` are backward-looking exponential-kernel estimates of
the spot drift and spot volatility and ``K2`` is the integral of the squared
kernel. Only returns completed by ``t`` enter either estimate.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from pathlib import Path
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from ._sweep import kernel_sums, unit_path_minima
from .config import Config
from .data import SessionSpec
from .preprocess import PriceSeries, preaverage, transaction_series

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class KernelSpec:
    """Left-sided exponential kernel ``K(x) = exp(x)`` for ``x <= 0``.

    Bandwidths are in seconds. ``hac_lags=None`` picks the Bartlett lag count
    per instant as ``ceil(n ** (1/3))`` capped at ``hac_cap``, ``n`` being the
    number of returns within three volatility bandwidths.
    """

    h_mean: float = 300.0
    h_vol: float = 1500.0
    hac_lags: int | None = None
    hac_cap: int = 10
    min_obs: int = 10

    def __post_init__(self):
        if not (self.h_vol > self.h_mean > 0):
            raise ValueError("need h_vol > h_mean > 0")

    @property
    def kernel_constant(self) -> float:
        # integral of exp(2x) over x <= 0
        return 0.5

    @staticmethod
    def kernel(x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= 0, np.exp(np.minimum(x, 0.0)), 0.0)

    @property
    def max_lags(self) -> int:
        return self.hac_cap if self.hac_lags is None else self.hac_lags

    def lag_count(self, n_local):
        if self.hac_lags is not None:
            return np.full(np.shape(n_local), self.hac_lags, dtype=int)
        n = np.asarray(n_local, dtype=float)
        return np.minimum(self.hac_cap, np.ceil(np.cbrt(n) - 1e-12)).astype(int)

    @classmethod
    def from_config(cls, cfg: Config) -> "KernelSpec":
        d = cls()
        lags = cfg.get("db.hac_lags")
        return cls(
            h_mean=cfg.get_float("db.h_mean_s", d.h_mean),
            h_vol=cfg.get_float("db.h_vol_s", d.h_vol),
            hac_lags=None if lags in (None, "auto") else int(lags),
            hac_cap=cfg.get_int("db.hac_cap", d.hac_cap),
            min_obs=cfg.get_int("db.min_obs", d.min_obs),
        )


@dataclass(frozen=True)
class DriftBurstSeries:
    """Statistic on the evaluation clock; NaN where it is undefined."""

    times: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    stat: np.ndarray


def _returns(series: PriceSeries):
    t = series.times
    return t[:-1], t[1:], np.diff(series.logp)


def _local_count(te: np.ndarray, t, window: float):
    t = np.asarray(t, dtype=float)
    return np.searchsorted(te, t, side="right") - np.searchsorted(te, t - window, side="right")


def spot_drift(series: PriceSeries, t: float, spec: KernelSpec = KernelSpec()) -> float:
    """Direct kernel sum for the drift at ``t``; NaN if too few local returns."""
    ts, te, r = _returns(series)
    if _local_count(te, t, 3 * spec.h_mean) < spec.min_obs:
        return math.nan
    done = te <= t
    w = spec.kernel((ts[done] - t) / spec.h_mean)
    return float(np.sum(w * r[done]) / spec.h_mean)


def spot_vol(series: PriceSeries, t: float, spec: KernelSpec = KernelSpec(),
             hac_lags: int | None = None) -> float:
    """Direct kernel sum for the volatility at ``t`` with a Bartlett HAC term.

    The variance is divided by the kernel mass covered since the first
    observation, so the estimate is not biased down near the open. A
    non-positive HAC-adjusted variance falls back to the unadjusted one.
    """
    ts, te, r = _returns(series)
    if _local_count(te, t, 3 * spec.h_mean) < spec.min_obs:
        return math.nan
    if hac_lags is None:
        hac_lags = int(spec.lag_count(_local_count(te, t, 3 * spec.h_vol)))
    done = np.flatnonzero(te <= t)
    w = spec.kernel((ts[done] - t) / spec.h_vol)
    rd = r[done]
    plain = float(np.sum(w * rd * rd))
    var = plain
    for lag in range(1, hac_lags + 1):
        if rd.size <= lag:
            break
        cross = float(np.sum(w[lag:] * rd[lag:] * rd[:-lag]))
        var += 2.0 * (1.0 - lag / (hac_lags + 1.0)) * cross
    if var <= 0:
        var = plain
    mass = 1.0 - math.exp(-(t - series.times[0]) / spec.h_vol)
    if mass <= 0:
        return math.nan
    return math.sqrt(var / spec.h_vol / mass)


def db_statistic(series: PriceSeries, t: float, spec: KernelSpec = KernelSpec()) -> float:
    mu = spot_drift(series, t, spec)
    sigma = spot_vol(series, t, spec)
    if not (math.isfinite(mu) and math.isfinite(sigma)) or sigma == 0:
        return math.nan
    return math.sqrt(spec.h_mean / spec.kernel_constant) * mu / sigma


def drift_burst_series(series: PriceSeries, spec: KernelSpec = KernelSpec(),
                       times: np.ndarray | None = None,
                       session: SessionSpec | None = None) -> DriftBurstSeries:
    """Statistic on a clock (default: every second of the session)."""
    if times is None:
        session = session or SessionSpec()
        times = np.arange(1.0, math.floor(session.duration) + 1.0)
    times = np.asarray(times, dtype=float)
    nan = np.full(times.size, np.nan)
    if len(series) < 2:
        return DriftBurstSeries(times, nan, nan.copy(), nan.copy())
    ts, te, r = _returns(series)
    max_lags = spec.max_lags
    s_mu, s_sq, s_cross = kernel_sums(ts, te, r, times, spec.h_mean, spec.h_vol, max_lags)

    n_mu = _local_count(te, times, 3 * spec.h_mean)
    lags = spec.lag_count(_local_count(te, times, 3 * spec.h_vol))
    var = s_sq.copy()
    for lag in range(1, max_lags + 1):
        active = lags >= lag
        weight = np.where(active, 2.0 * (1.0 - lag / (lags + 1.0)), 0.0)
        var += weight * s_cross[:, lag - 1]
    var = np.where(var <= 0, s_sq, var)
    mass = 1.0 - np.exp(-(times - series.times[0]) / spec.h_vol)
    with np.errstate(divide="ignore", invalid="ignore"):
        sigma = np.sqrt(var / spec.h_vol / mass)
        mu = s_mu / spec.h_mean
        stat = math.sqrt(spec.h_mean / spec.kernel_constant) * mu / sigma
    bad = (n_mu < spec.min_obs) | ~(mass > 0)
    mu[bad] = np.nan
    sigma[bad] = np.nan
    stat[bad | ~(sigma > 0)] = np.nan
    return DriftBurstSeries(times, mu, sigma, stat)


def critical_value(spec: KernelSpec = KernelSpec(), session: SessionSpec = SessionSpec(),
                   confidence: float = 0.999, n_paths: int = 5000, seed: int = 0,
                   batch: int = 50) -> float:
    """Lower quantile of the session minimum of the statistic under a driftless
    unit-volatility Brownian motion sampled every second."""
    if not 0 < confidence < 1:
        raise ValueError("confidence must lie in (0, 1)")
    if n_paths < 1000:
        raise ValueError("n_paths must be at least 1000")
    minima = simulate_null_minima(spec, session, n_paths, seed, batch)
    return float(np.quantile(minima, 1.0 - confidence))


def simulate_null_minima(spec: KernelSpec, session: SessionSpec, n_paths: int,
                         seed: int = 0, batch: int = 50) -> np.ndarray:
    n = int(math.floor(session.duration))
    start = int(math.ceil(session.analysis_offset))
    lags = spec.max_lags if spec.hac_lags is None else spec.hac_lags
    rng = np.random.default_rng(seed)
    out = np.empty(n_paths)
    for lo in range(0, n_paths, batch):
        hi = min(n_paths, lo + batch)
        z = rng.standard_normal((hi - lo, n))
        if spec.hac_lags is None:
            out[lo:hi] = unit_path_minima(z, start, spec.h_mean, spec.h_vol, lags,
                                          spec.kernel_constant, float(spec.min_obs))
        else:
            for i in range(hi - lo):
                series = PriceSeries(np.arange(n + 1, dtype=float), np.r_[0.0, np.cumsum(z[i])])
                st = drift_burst_series(series, spec, np.arange(1.0, n + 1.0))
                out[lo + i] = np.nanmin(st.stat[start - 1:])
    return out


@dataclass(frozen=True)
class EpmEvent:
    stock: str
    date: str
    t_start: float
    t_trough: float
    trough_stat: float
    classification: str = "unsystematic"
    direction: str = "down"

    @property
    def tau(self) -> float:
        return self.t_trough - self.t_start

    @property
    def t_pre_event(self) -> float:
        return self.t_start - 2.0 * self.tau

    @property
    def t_end(self) -> float:
        return self.t_trough + 3.0 * self.tau

    @property
    def stage_bounds(self) -> tuple[float, float, float, float]:
        """Start, end of early, end of intermediate, trough."""
        third = self.tau / 3.0
        return (self.t_start, self.t_start + third, self.t_start + 2 * third, self.t_trough)

    @property
    def key(self) -> tuple[str, str]:
        return (self.stock, self.date)

    @property
    def event_id(self) -> str:
        return f"{self.stock}_{self.date}_{int(round(self.t_trough))}"

    def phase_windows(self) -> dict[str, tuple[float, float]]:
        """Left-open right-closed windows of the five phases."""
        s, e, i, tr = self.stage_bounds
        return {
            "pre_event": (self.t_pre_event, s),
            "early": (s, e),
            "intermediate": (e, i),
            "late": (i, tr),
            "recovery": (tr, self.t_end),
        }


PHASES = ("pre_event", "early", "intermediate", "late", "recovery")


@dataclass
class Rejection:
    stock: str
    date: str
    t_trough: float
    reason: str


@dataclass
class Segmentation:
    events: list[EpmEvent] = field(default_factory=list)
    rejected: list[Rejection] = field(default_factory=list)


def segment_events(stats: DriftBurstSeries, barrier: float, *, stock: str = "",
                   date: str = "", session: SessionSpec = SessionSpec(),
                   merge_gap: float = 60.0, start_level: float = -1.0,
                   direction: str = "down") -> Segmentation:
    """Split the statistic into drift-burst episodes.

    Sub-barrier runs closer than ``merge_gap`` seconds merge, as do runs that
    share the same crossing of ``start_level``. The trough is the most extreme
    value of a merged run and the start is the first instant of the last
    stretch at or beyond ``start_level`` before the trough. Only instants from
    the analysis start onward can trigger an event; episodes whose full window
    leaves the session are rejected.
    """
    if barrier >= 0:
        raise ValueError("barrier must be negative")
    sign = 1.0 if direction == "down" else -1.0
    t = stats.times
    x = sign * stats.stat
    out = Segmentation()
    hit = (x <= barrier) & (t >= session.analysis_offset)
    idx = np.flatnonzero(hit)
    if idx.size == 0:
        return out

    runs: list[list[int]] = []
    for i in idx:
        if runs and t[i] - t[runs[-1][1]] < merge_gap:
            runs[-1][1] = i
        else:
            runs.append([i, i])

    above = ~(x <= start_level)  # NaN counts as a break
    candidates = []
    for lo, hi in runs:
        trough = lo + int(np.nanargmin(x[lo:hi + 1]))
        prior = np.flatnonzero(above[:trough])
        start = prior[-1] + 1 if prior.size else None
        candidates.append((start, trough))

    merged: list[tuple[int | None, int]] = []
    for start, trough in candidates:
        if merged and start is not None and merged[-1][0] == start:
            if x[trough] < x[merged[-1][1]]:
                merged[-1] = (start, trough)
            continue
        merged.append((start, trough))

    for start, trough in merged:
        tt = float(t[trough])
        if start is None:
            out.rejected.append(Rejection(stock, date, tt, f"no crossing of {start_level} before trough"))
            continue
        ev = EpmEvent(stock, date, float(t[start]), tt, float(stats.stat[trough]),
                      direction=direction)
        if ev.tau <= 0:
            out.rejected.append(Rejection(stock, date, tt, "zero duration"))
        elif ev.t_pre_event < 0 or ev.t_end > session.duration:
            out.rejected.append(Rejection(stock, date, tt, "event window leaves the session"))
        else:
            out.events.append(ev)
    for rej in out.rejected:
        logger.info("%s %s: rejected event at %.0fs (%s)", rej.stock, rej.date, rej.t_trough, rej.reason)
    return out


def classify_systematic(events: Sequence[EpmEvent], threshold: int = 10) -> list[EpmEvent]:
    """Label events systematic when their drop windows, chained by overlap on
    the same date, involve at least ``threshold`` distinct stocks."""
    events = list(events)
    labels = ["unsystematic"] * len(events)
    by_date: dict[str, list[int]] = {}
    for i, ev in enumerate(events):
        by_date.setdefault(ev.date, []).append(i)
    for members in by_date.values():
        members.sort(key=lambda i: (events[i].t_start, events[i].t_trough, events[i].stock))
        group: list[int] = []
        reach = -math.inf
        groups = []
        for i in members:
            if group and events[i].t_start > reach:
                groups.append(group)
                group = []
                reach = -math.inf
            group.append(i)
            reach = max(reach, events[i].t_trough)
        if group:
            groups.append(group)
        for g in groups:
            if len({events[i].stock for i in g}) >= threshold:
                for i in g:
                    labels[i] = "systematic"
    return [replace(ev, classification=lab) for ev, lab in zip(events, labels)]


def normalize_event_time(event: EpmEvent, mean_duration: float, t) -> np.ndarray | float:
    """Average-elapsed-time coordinate ``(t - t_start) * mean_duration / tau``,
    in the unit of ``mean_duration``."""
    if event.tau <= 0:
        raise ValueError("event duration must be positive")
    return (np.asarray(t, dtype=float) - event.t_start) * (mean_duration / event.tau)


def filter_min_duration(events: Iterable[EpmEvent], min_duration: float = 100.0) -> list[EpmEvent]:
    return [ev for ev in events if ev.tau >= min_duration]


# ---------------------------------------------------------------- alternatives

@dataclass(frozen=True)
class AltFlags:
    """Per (stock, date) flags from a percentile detector on 10-second returns."""

    values: dict[tuple[str, str], np.ndarray]
    flags: dict[tuple[str, str], np.ndarray]
    thresholds: dict[str, float]

    def negative(self) -> dict[tuple[str, str], np.ndarray]:
        return {k: self.flags[k] & (self.values[k] < 0) for k in self.flags}


def _percentile_flags(values: dict[tuple[str, str], np.ndarray], q: float) -> AltFlags:
    thresholds: dict[str, float] = {}
    stocks = sorted({k[0] for k in values})
    for s in stocks:
        pooled = np.concatenate([np.abs(v[np.isfinite(v)]) for k, v in values.items() if k[0] == s])
        thresholds[s] = float(np.quantile(pooled, q)) if pooled.size else math.inf
    flags = {}
    for k, v in values.items():
        with np.errstate(invalid="ignore"):
            flags[k] = np.isfinite(v) & (np.abs(v) >= thresholds[k[0]])
    return AltFlags(values, flags, thresholds)


def return_epm_detector(returns: dict[tuple[str, str], np.ndarray],
                        quantile: float = 0.999) -> AltFlags:
    """Flag 10-second returns at or above the stock's ``quantile`` of |return|."""
    return _percentile_flags(returns, quantile)


def market_returns(returns: dict[tuple[str, str], np.ndarray]) -> dict[str, np.ndarray]:
    """Equal-weighted cross-sectional mean return per date."""
    by_date: dict[str, list[np.ndarray]] = {}
    for (stock, date), r in returns.items():
        by_date.setdefault(date, []).append(r)
    out = {}
    for date, rs in by_date.items():
        stack = np.vstack(rs)
        with np.errstate(invalid="ignore"), np.testing.suppress_warnings() as sup:
            sup.filter(RuntimeWarning)
            out[date] = np.nanmean(stack, axis=0)
    return out


def residual_epm_detector(returns: dict[tuple[str, str], np.ndarray],
                          market: dict[str, np.ndarray] | None = None,
                          n_lags: int = 10, quantile: float = 0.999) -> AltFlags:
    """Flag residuals of a per-stock OLS of the return on ``n_lags`` own and
    ``n_lags`` market lags, using the same percentile rule."""
    if market is None:
        market = market_returns(returns)
    residuals: dict[tuple[str, str], np.ndarray] = {}
    for stock in sorted({k[0] for k in returns}):
        keys = sorted(k for k in returns if k[0] == stock)
        rows, ys, where = [], [], []
        for key in keys:
            r = returns[key]
            m = market[key[1]]
            for t in range(n_lags, r.size):
                own = r[t - n_lags:t][::-1]
                mk = m[t - n_lags:t][::-1]
                if np.isfinite(r[t]) and np.all(np.isfinite(own)) and np.all(np.isfinite(mk)):
                    rows.append(np.concatenate(([1.0], own, mk)))
                    ys.append(r[t])
                    where.append((key, t))
        n_par = 1 + 2 * n_lags
        if len(ys) <= n_par:
            raise ValueError(f"{stock}: {len(ys)} usable returns, too few for {2 * n_lags} lags")
        X = np.asarray(rows)
        y = np.asarray(ys)
        beta, *_ = np.linalg.lstsq(X, y, rcond=None)
        e = y - X @ beta
        for key in keys:
            residuals[key] = np.full(returns[key].size, np.nan)
        for (key, t), val in zip(where, e):
            residuals[key][t] = val
    return _percentile_flags(residuals, quantile)


def detect_tape(tape, barrier: float, spec: KernelSpec = KernelSpec(),
                session: SessionSpec = SessionSpec(), window: int = 5,
                merge_gap: float = 60.0, direction: str = "down"):
    """Run the full detector on one day: tick prices, pre-averaging, statistic
    on the 1-second clock, segmentation. Returns ``(stats, segmentation)``."""
    raw = transaction_series(tape)
    clock = np.arange(1.0, math.floor(session.duration) + 1.0)
    if len(raw) < max(window, 2) + 1:
        nan = np.full(clock.size, np.nan)
        return DriftBurstSeries(clock, nan, nan.copy(), nan.copy()), Segmentation()
    stats = drift_burst_series(preaverage(raw, window), spec, clock)
    seg = segment_events(stats, barrier, stock=tape.stock, date=tape.date,
                         session=session, merge_gap=merge_gap, direction=direction)
    return stats, seg


EVENT_HEADER = ["stock", "date", "t_pre_event", "t_start", "t_trough", "t_end",
                "tau_s", "trough_stat", "classification"]


def events_csv(events: Sequence[EpmEvent]) -> str:
    """Events as CSV; instants in seconds since the open."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EVENT_HEADER)
    for ev in sorted(events, key=lambda e: (e.date, e.stock, e.t_trough)):
        w.writerow([ev.stock, ev.date, repr(ev.t_pre_event), repr(ev.t_start),
                    repr(ev.t_trough), repr(ev.t_end), repr(ev.tau),
                    repr(round(ev.trough_stat, 10)), ev.classification])
    return buf.getvalue()


def write_event_list(events: Sequence[EpmEvent], path: str | Path) -> None:
    Path(path).write_text(events_csv(events), encoding="utf-8")


def read_event_list(path: str | Path) -> list[EpmEvent]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != EVENT_HEADER:
            raise ValueError(f"{path}: header must be {','.join(EVENT_HEADER)}")
        return [EpmEvent(r["stock"], r["date"], float(r["t_start"]), float(r["t_trough"]),
                         float(r["trough_stat"]), r["classification"]) for r in reader]
