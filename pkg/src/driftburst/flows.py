"""Trader-category flow measures.

Sign conventions: a trade of value ``V`` adds ``+V`` to the buyer's trading
imbalance and ``-V`` to the seller's. The aggressive part (DI) collects the
trades a category initiated, the passive part (SI) those it accepted, so
``TI = DI + SI`` cell by cell. Arrays indexed by category use the integer
codes of :class:`~driftburst.data.TraderCategory`, OTHER included.
"""

from __future__ import annotations

import datetime as dt
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .data import (CATEGORIES, DMM_CATEGORIES, N_CODES, US, DayTape, SessionSpec,
                   TradeEvent, TraderCategory, interval_index, session_grid)
from .detector import PHASES, EpmEvent
from .preprocess import PeriodicityProfile, PriceSeries, periodicity_profile, transaction_series

logger = logging.getLogger(__name__)

BPS = 1e-4


# ------------------------------------------------------------------ imbalances

def trading_imbalance(trades: Iterable[TradeEvent], category: TraderCategory) -> float:
    """Buy value minus sell value of ``category`` over ``trades``."""
    di, si = demand_supply_imbalance(trades, category)
    return di + si


def demand_supply_imbalance(trades: Iterable[TradeEvent],
                            category: TraderCategory) -> tuple[float, float]:
    """``(DI, SI)``: the aggressive and passive parts of the trading imbalance."""
    di = si = 0.0
    for t in trades:
        v = t.value
        sign_as_buyer = v if t.buyer_category == category else 0.0
        sign_as_seller = -v if t.seller_category == category else 0.0
        if t.side == 1:
            di += sign_as_buyer
            si += sign_as_seller
        else:
            di += sign_as_seller
            si += sign_as_buyer
    return di, si


@dataclass(frozen=True)
class Imbalances:
    """Per (interval, category code) imbalances in currency units."""

    t_end: np.ndarray
    ti: np.ndarray
    di: np.ndarray
    si: np.ndarray


def interval_imbalances(tape: DayTape, session: SessionSpec, step: float = 10.0) -> Imbalances:
    grid = session_grid(session, step)
    n = grid.size
    idx = interval_index(tape.trade_ts, step, n)
    keep = idx >= 0
    k = idx[keep]
    v = tape.value[keep]
    side = tape.side[keep]
    buyer = tape.buyer[keep].astype(np.int64)
    seller = tape.seller[keep].astype(np.int64)
    di = np.zeros((n, N_CODES))
    si = np.zeros((n, N_CODES))
    up = side == 1
    # buyer-initiated: buyer aggressive (+V), seller passive (-V)
    np.add.at(di, (k[up], buyer[up]), v[up])
    np.add.at(si, (k[up], seller[up]), -v[up])
    dn = ~up
    np.add.at(di, (k[dn], seller[dn]), -v[dn])
    np.add.at(si, (k[dn], buyer[dn]), v[dn])
    return Imbalances(grid, di + si, di, si)


# ------------------------------------------------------------------ prices

def last_price_at(series: PriceSeries, t) -> np.ndarray | float:
    """Last log-price at or before ``t``; NaN when nothing traded yet."""
    t_arr = np.asarray(t, dtype=float)
    i = np.searchsorted(series.times, t_arr, side="right") - 1
    out = np.where(i >= 0, series.logp[np.maximum(i, 0)], np.nan)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PriceImpact:
    ppi: float
    dpi: float
    tpi: float


class ImpactError(ValueError):
    pass


def price_impact(event: EpmEvent, series: PriceSeries) -> PriceImpact:
    if series.times.size == 0 or series.times[0] > event.t_pre_event:
        raise ImpactError(f"{event.event_id}: no trade at or before the pre-event instant")
    p_pre, p_trough, p_end = last_price_at(series, [event.t_pre_event, event.t_trough, event.t_end])
    dpi = p_trough - p_pre
    ppi = p_end - p_pre
    return PriceImpact(float(ppi), float(dpi), float(dpi - ppi))


# ------------------------------------------------------------------ selling pressure

MAX_WINDOW_MIN = 30


def minute_signed_volume(tape: DayTape, session: SessionSpec) -> np.ndarray:
    """Aggressor-signed traded value per right-closed one-minute bin."""
    n = session_grid(session, 60.0).size
    idx = interval_index(tape.trade_ts, 60.0, n)
    keep = idx >= 0
    out = np.zeros(n)
    np.add.at(out, idx[keep], tape.side[keep] * tape.value[keep])
    return out


def raw_selling_pressure(signed: np.ndarray, max_window: int = MAX_WINDOW_MIN) -> tuple[np.ndarray, np.ndarray]:
    """Minimum over ``u = 0..max_window`` of the signed value summed over the
    minutes ``m-u .. m``, with the minimizing ``u`` (smallest on ties).
    Windows are truncated at the open."""
    n = signed.size
    raw = np.empty(n)
    arg = np.zeros(n, dtype=np.int64)
    csum = np.concatenate(([0.0], np.cumsum(signed)))
    for m in range(n):
        top = min(max_window, m)
        sums = csum[m + 1] - csum[m - np.arange(top + 1)]
        j = int(np.argmin(sums))  # first occurrence: smallest u
        raw[m] = sums[j]
        arg[m] = j
    return raw, arg


def selling_pressure(tape: DayTape, session: SessionSpec, profile: PeriodicityProfile) -> pd.DataFrame:
    """Normalized selling pressure per minute with the minimizing window ``u``."""
    raw, u = raw_selling_pressure(minute_signed_volume(tape, session))
    factor = profile.factor
    if factor.size != raw.size:
        raise ValueError("profile length does not match the session minutes")
    return pd.DataFrame({
        "stock": tape.stock, "date": tape.date,
        "minute": np.arange(1, raw.size + 1),
        "raw_sp": raw, "sp": factor * raw, "u_star": u,
    })


def pressure_table(tapes: dict[tuple[str, str], DayTape], session: SessionSpec) -> pd.DataFrame:
    """Selling pressure for every tape, normalized by per-stock profiles."""
    raws: dict[tuple[str, str], tuple[np.ndarray, np.ndarray]] = {}
    for key, tape in sorted(tapes.items()):
        raws[key] = raw_selling_pressure(minute_signed_volume(tape, session))
    frames = []
    for stock in sorted({k[0] for k in raws}):
        keys = [k for k in sorted(raws) if k[0] == stock]
        prof = periodicity_profile(np.vstack([raws[k][0] for k in keys]), stock)
        for k in keys:
            raw, u = raws[k]
            frames.append(pd.DataFrame({
                "stock": stock, "date": k[1], "minute": np.arange(1, raw.size + 1),
                "raw_sp": raw, "sp": prof.factor * raw, "u_star": u,
            }))
    if not frames:
        return pd.DataFrame(columns=["stock", "date", "minute", "raw_sp", "sp", "u_star"])
    return pd.concat(frames, ignore_index=True)


def extract_pressure_tail(pressure: pd.DataFrame, events: Sequence[EpmEvent],
                          fraction: float = 0.001) -> pd.DataFrame:
    """The ``fraction`` lowest normalized selling-pressure minutes, each labelled
    ``no_epm``, ``unsystematic`` or ``systematic``.

    A tail minute belongs to an event when its window ``[m-u*, m]`` (in
    minutes since the open) overlaps the event window from pre-event to end on
    the same stock and date; systematic takes precedence over unsystematic.
    Minutes with an undefined periodicity factor are excluded.
    """
    ok = pressure[np.isfinite(pressure["sp"].to_numpy())]
    n_tail = int(round(fraction * len(ok)))
    order = np.argsort(ok["sp"].to_numpy(), kind="stable")[:n_tail]
    tail = ok.iloc[order].copy().reset_index(drop=True)
    by_day: dict[tuple[str, str], list[EpmEvent]] = {}
    for ev in events:
        by_day.setdefault(ev.key, []).append(ev)
    labels = []
    for stock, date, m, u in zip(tail["stock"], tail["date"], tail["minute"], tail["u_star"]):
        lo, hi = 60.0 * (m - u - 1), 60.0 * m
        label = "no_epm"
        for ev in by_day.get((stock, str(date)), []):
            if lo < ev.t_end and ev.t_pre_event < hi:
                if ev.classification == "systematic":
                    label = "systematic"
                    break
                label = "unsystematic"
        labels.append(label)
    tail["set"] = labels
    return tail


def tail_imbalance_changes(tail: pd.DataFrame, tapes: dict[tuple[str, str], DayTape],
                           session: SessionSpec) -> pd.DataFrame:
    """Per tail minute and category, TI accumulated over ``[m-u*, m]``."""
    rows = []
    cache: dict[tuple[str, str], np.ndarray] = {}
    for rec in tail.itertuples(index=False):
        key = (rec.stock, str(rec.date))
        if key not in cache:
            cache[key] = interval_imbalances(tapes[key], session, 60.0).ti
        ti = cache[key]
        lo = int(rec.minute - rec.u_star - 1)
        window = ti[lo:int(rec.minute)].sum(axis=0)
        for c in CATEGORIES:
            rows.append((rec.stock, rec.date, rec.minute, rec.u_star, rec.set, c.name, window[int(c)]))
    return pd.DataFrame(rows, columns=["stock", "date", "minute", "u_star", "set", "category", "delta_ti"])


# ------------------------------------------------------------------ P&L and fees

@dataclass(frozen=True)
class FeeSchedule:
    """Exchange fees in basis points of traded value."""

    taker_fee: float = 0.30
    rebate: float = 0.20
    rebate_high: float = 0.22
    high_from: tuple[int, int] = (6, 3)
    high_to: tuple[int, int] = (10, 31)
    standard_fee: float = 0.55
    auction_fee: float = 0.6

    def __post_init__(self):
        vals = (self.taker_fee, self.rebate, self.rebate_high, self.standard_fee, self.auction_fee)
        if min(vals) < 0:
            raise ValueError("fees must be non-negative")
        if not (max(self.rebate, self.rebate_high) < self.taker_fee < self.standard_fee):
            raise ValueError("need rebate < taker fee < standard fee")

    def rebate_on(self, date: str) -> float:
        d = dt.datetime.strptime(date, "%Y%m%d").date()
        lo = dt.date(d.year, *self.high_from)
        hi = dt.date(d.year, *self.high_to)
        return self.rebate_high if lo <= d <= hi else self.rebate

    def trade_costs(self, tape: DayTape, category: TraderCategory) -> np.ndarray:
        """Signed fee cash flow per trade for ``category`` (negative = paid)."""
        v = tape.value
        is_buyer = tape.buyer == category
        is_seller = tape.seller == category
        aggressive = (is_buyer & (tape.side == 1)).astype(float) + (is_seller & (tape.side == -1))
        passive = (is_buyer & (tape.side == -1)).astype(float) + (is_seller & (tape.side == 1))
        if category.is_dmm:
            return BPS * v * (self.rebate_on(tape.date) * passive - self.taker_fee * aggressive)
        return -BPS * v * self.standard_fee * (aggressive + passive)


def pnl_intervals(tape: DayTape, session: SessionSpec, resets: Sequence[float] = (),
                  step: float = 10.0, fees: FeeSchedule | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Mark-to-market P&L per (interval, category code) over the whole day.

    Inventories start at zero at the open and are reset to zero at each
    instant in ``resets`` (seconds since the open, snapped to the grid).
    Returns ``(t_end, pnl)``; intervals before the first trade are NaN.
    """
    grid = session_grid(session, step)
    n = grid.size
    idx = interval_index(tape.trade_ts, step, n)
    keep = idx >= 0
    k = idx[keep]
    price = tape.price[keep]
    qty = tape.quantity[keep].astype(float)
    buyer = tape.buyer[keep].astype(np.int64)
    seller = tape.seller[keep].astype(np.int64)

    # mark: last trade price at or before each interval end
    last = np.full(n, -1, dtype=np.int64)
    if k.size:
        last[k] = np.arange(k.size)  # later trades overwrite: last in interval
    last = np.maximum.accumulate(last)
    mark = np.where(last >= 0, price[np.maximum(last, 0)], np.nan)

    trade_pnl = np.zeros((n, N_CODES))
    gain = qty * (mark[k] - price)
    np.add.at(trade_pnl, (k, buyer), gain)
    np.add.at(trade_pnl, (k, seller), -gain)
    flow = np.zeros((n, N_CODES))
    np.add.at(flow, (k, buyer), qty)
    np.add.at(flow, (k, seller), -qty)

    reset_at = set(int(round(r / step)) for r in resets)
    pnl = np.full((n, N_CODES), np.nan)
    inv = np.zeros(N_CODES)
    prev_mark = math.nan
    for i in range(n):
        if i in reset_at:
            inv[:] = 0.0
        if math.isnan(mark[i]):
            continue
        carry = inv * (mark[i] - prev_mark) if not math.isnan(prev_mark) else 0.0
        pnl[i] = carry + trade_pnl[i]
        inv += flow[i]
        prev_mark = mark[i]
    if fees is not None:
        for c in TraderCategory:
            cost = fees.trade_costs(tape, c)[keep]
            add = np.zeros(n)
            np.add.at(add, k, cost)
            pnl[:, int(c)] += add
    return grid, pnl


def event_pnl(tape: DayTape, event: EpmEvent, category: TraderCategory,
              session: SessionSpec = SessionSpec(), fees: FeeSchedule | None = None,
              step: float = 10.0) -> pd.DataFrame:
    """P&L of one category per 10-second interval of an event window, with
    zero inventory at the pre-event instant."""
    grid, pnl = pnl_intervals(tape, session, [event.t_pre_event], step, fees)
    inside = (grid > event.t_pre_event + 1e-9) & (grid <= event.t_end + 1e-9)
    return pd.DataFrame({"t_end": grid[inside], "pnl": pnl[inside, int(category)]})


def dmm_rebate_estimate(events: Sequence[EpmEvent], tapes: dict[tuple[str, str], DayTape],
                        rebate_bps: float = 0.20) -> dict[str, float]:
    """Average rebate revenue per event for each DMM category: passive value
    supplied between start and trough times ``rebate_bps``."""
    if not events:
        return {c.name: 0.0 for c in DMM_CATEGORIES}
    totals = {c: 0.0 for c in DMM_CATEGORIES}
    for ev in events:
        tape = tapes[ev.key]
        t = tape.trade_ts / US
        inside = (t > ev.t_start) & (t <= ev.t_trough)
        v = tape.value
        for c in DMM_CATEGORIES:
            passive = ((tape.buyer == c) & (tape.side == -1)) | ((tape.seller == c) & (tape.side == 1))
            totals[c] += float(np.sum(v[inside & passive]))
    return {c.name: rebate_bps * BPS * totals[c] / len(events) for c in DMM_CATEGORIES}


# ------------------------------------------------------------------ descriptives

SUMMARY_STATS = ("mean", "std", "min", "max", "q10", "median", "q90")
DESCRIPTIVE_ROWS = ("return", "duration", "duration_pct", "trades", "trades_pct",
                    "volume", "volume_pct", "signed_volume", "signed_volume_pct")


def _pct(part: float, whole: float) -> float:
    return 100.0 * part / whole if whole else 0.0


def event_descriptives(events: Sequence[EpmEvent], tapes: dict[tuple[str, str], DayTape],
                       session: SessionSpec = SessionSpec()) -> pd.DataFrame:
    """Per event, over ``(t_start, t_trough]``: return in percent, duration in
    minutes, trade count, value in thousands and signed value in thousands,
    each also as a percentage of the full day. The signed-value percentage is
    relative to the absolute day total."""
    rows = []
    for ev in events:
        tape = tapes[ev.key]
        t = tape.trade_ts / US
        inside = (t > ev.t_start) & (t <= ev.t_trough)
        v = tape.value
        sv = tape.side * v
        series = transaction_series(tape)
        p0, p1 = last_price_at(series, [ev.t_start, ev.t_trough])
        day_sv = float(np.sum(sv))
        rows.append({
            "event": ev.event_id, "stock": ev.stock, "date": ev.date,
            "classification": ev.classification,
            "return": 100.0 * (p1 - p0),
            "duration": ev.tau / 60.0,
            "duration_pct": _pct(ev.tau, session.duration),
            "trades": int(np.count_nonzero(inside)),
            "trades_pct": _pct(np.count_nonzero(inside), tape.n_trades),
            "volume": float(np.sum(v[inside])) / 1e3,
            "volume_pct": _pct(float(np.sum(v[inside])), float(np.sum(v))),
            "signed_volume": float(np.sum(sv[inside])) / 1e3,
            "signed_volume_pct": _pct(float(np.sum(sv[inside])), abs(day_sv)),
        })
    return pd.DataFrame(rows, columns=["event", "stock", "date", "classification", *DESCRIPTIVE_ROWS])


def summarize(values: np.ndarray) -> dict[str, float]:
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        return {k: math.nan for k in SUMMARY_STATS}
    return {
        "mean": float(np.mean(x)),
        "std": float(np.std(x, ddof=1)) if x.size > 1 else math.nan,
        "min": float(np.min(x)), "max": float(np.max(x)),
        "q10": float(np.quantile(x, 0.10)),
        "median": float(np.median(x)),
        "q90": float(np.quantile(x, 0.90)),
    }


def descriptives_table(per_event: pd.DataFrame) -> pd.DataFrame:
    """Summary rows in the layout of the descriptive-statistics table."""
    out = [{"statistic": row, **summarize(per_event[row].to_numpy())} for row in DESCRIPTIVE_ROWS]
    return pd.DataFrame(out, columns=["statistic", *SUMMARY_STATS])


# ------------------------------------------------------------------ series frame

def series_frame(tape: DayTape, session: SessionSpec, events: Sequence[EpmEvent] = (),
                 step: float = 10.0, fees: FeeSchedule | None = None) -> pd.DataFrame:
    """Uniform-interval aggregates for one (stock, date).

    Columns: interval end, log return of the last trade price (zero until the
    first trade), traded value, percentage spread and log midquote of the
    prevailing quote at the interval end (the first quote stands in before
    any quote), and per category ``TI_``, ``DI_``, ``SI_`` and ``PNL_``
    columns. ``INV_`` holds net inventory from the open in millions. P&L
    inventories reset at each event's pre-event instant.
    """
    imb = interval_imbalances(tape, session, step)
    grid = imb.t_end
    n = grid.size
    idx = interval_index(tape.trade_ts, step, n)
    keep = idx >= 0
    volume = np.zeros(n)
    np.add.at(volume, idx[keep], tape.value[keep])
    counts = np.bincount(idx[keep], minlength=n)

    last = np.full(n, -1, dtype=np.int64)
    if keep.any():
        last[idx[keep]] = np.flatnonzero(keep)
    last = np.maximum.accumulate(last)
    logmark = np.where(last >= 0, np.log(tape.price[np.maximum(last, 0)]), np.nan)
    ret = np.diff(np.concatenate(([np.nan], logmark)))
    ret = np.where(np.isfinite(ret), ret, 0.0)

    if tape.quote_ts.size:
        qi = np.searchsorted(tape.quote_ts, np.rint(grid * US).astype(np.int64), side="right") - 1
        qi = np.maximum(qi, 0)
        mid = 0.5 * (tape.bid[qi] + tape.ask[qi])
        spread = 100.0 * (tape.ask[qi] - tape.bid[qi]) / mid
        logmid = np.log(mid)
    else:
        spread = np.full(n, np.nan)
        logmid = np.full(n, np.nan)

    _, pnl = pnl_intervals(tape, session, [ev.t_pre_event for ev in events], step, fees)
    data = {
        "stock": tape.stock, "date": tape.date, "interval": np.arange(n), "t_end": grid,
        "ret": ret, "volume": volume, "trades": counts, "spread_pct": spread, "logmid": logmid,
    }
    for c in CATEGORIES:
        j = int(c)
        data[f"TI_{c.name}"] = imb.ti[:, j]
        data[f"DI_{c.name}"] = imb.di[:, j]
        data[f"SI_{c.name}"] = imb.si[:, j]
        data[f"PNL_{c.name}"] = np.nan_to_num(pnl[:, j])
        data[f"INV_{c.name}"] = np.cumsum(imb.ti[:, j]) / 1e6
    data["TI_OTHER"] = imb.ti[:, int(TraderCategory.OTHER)]
    return pd.DataFrame(data)


def long_imbalances(frame: pd.DataFrame, event: EpmEvent) -> pd.DataFrame:
    """Event-window rows of a series frame in long format."""
    inside = (frame["t_end"] > event.t_pre_event + 1e-9) & (frame["t_end"] <= event.t_end + 1e-9)
    sub = frame[inside]
    rows = []
    for c in CATEGORIES:
        rows.append(pd.DataFrame({
            "event": event.event_id, "interval": sub["interval"].to_numpy(),
            "t_end": sub["t_end"].to_numpy(), "category": c.name,
            "TI": sub[f"TI_{c.name}"].to_numpy(), "DI": sub[f"DI_{c.name}"].to_numpy(),
            "SI": sub[f"SI_{c.name}"].to_numpy(),
        }))
    return pd.concat(rows, ignore_index=True)


def phase_of(t_end: np.ndarray, event: EpmEvent) -> np.ndarray:
    """Phase label per interval end (empty string outside the event window)."""
    out = np.full(np.shape(t_end), "", dtype=object)
    for name, (lo, hi) in event.phase_windows().items():
        out[(t_end > lo + 1e-9) & (t_end <= hi + 1e-9)] = name
    return out


__all__ = [
    "BPS", "FeeSchedule", "ImpactError", "Imbalances", "PHASES", "PriceImpact",
    "demand_supply_imbalance", "descriptives_table", "dmm_rebate_estimate",
    "event_descriptives", "event_pnl", "extract_pressure_tail", "interval_imbalances",
    "last_price_at", "long_imbalances", "minute_signed_volume", "phase_of",
    "pnl_intervals", "pressure_table", "price_impact", "raw_selling_pressure",
    "selling_pressure", "series_frame", "summarize", "tail_imbalance_changes",
    "trading_imbalance",
]
