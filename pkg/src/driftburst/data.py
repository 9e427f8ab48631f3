"""Event types, the trader-category taxonomy and event-file I/O.

Event files are UTF-8 CSV, one per (stock, date), named ``<STOCK>_<YYYYMMDD>.csv``
with header ``timestamp_us,type,price,quantity,side,buyer_cat,seller_cat,bid,ask``.
Timestamps are integer microseconds since the session open.

A day of events is held column-wise in a :class:`DayTape`; the row types
:class:`TradeEvent` and :class:`QuoteEvent` are available for iteration and
for building small tapes by hand.
"""

from __future__ import annotations

import csv
import enum
import io
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .config import Config, parse_clock

logger = logging.getLogger(__name__)

HEADER = ["timestamp_us", "type", "price", "quantity", "side",
          "buyer_cat", "seller_cat", "bid", "ask"]
FILENAME_RE = re.compile(r"^(?P<stock>[^_]+)_(?P<date>\d{8})\.csv$")
US = 1_000_000


class EventFileError(ValueError):
    """Malformed event file. The message names the offending line."""


class TraderCategory(enum.IntEnum):
    PURE_HFT_MM = 0
    PURE_HFT_OWN = 1
    PURE_CLIENT = 2
    IB_HFT_MM = 3
    IB_HFT_OWN = 4
    IB_HFT_PARENT = 5
    IB_CLIENT = 6
    NON_HFT_CLIENT = 7
    NON_HFT_OWN = 8
    OTHER = 9

    @property
    def is_dmm(self) -> bool:
        return self in (TraderCategory.PURE_HFT_MM, TraderCategory.IB_HFT_MM)

    @property
    def is_non_hft(self) -> bool:
        return self in NON_HFT

    @classmethod
    def parse(cls, text: str) -> "TraderCategory":
        key = text.strip().upper().replace("-", "_").replace(" ", "_")
        try:
            return cls[key]
        except KeyError:
            return cls.OTHER


# The nine analysed categories; OTHER trades but is left out of category tables.
CATEGORIES: tuple[TraderCategory, ...] = tuple(c for c in TraderCategory
                                               if c is not TraderCategory.OTHER)
NON_HFT = frozenset({TraderCategory.NON_HFT_CLIENT, TraderCategory.NON_HFT_OWN})
DMM_CATEGORIES = (TraderCategory.PURE_HFT_MM, TraderCategory.IB_HFT_MM)
N_CODES = len(TraderCategory)


@dataclass(frozen=True)
class SessionSpec:
    """Trading session in seconds since midnight."""

    open_time: float = 9 * 3600.0
    close_time: float = 17.5 * 3600.0
    analysis_start: float = 9.5 * 3600.0

    def __post_init__(self):
        if not (self.open_time < self.analysis_start < self.close_time):
            raise ValueError("need open_time < analysis_start < close_time")

    @property
    def duration(self) -> float:
        return self.close_time - self.open_time

    @property
    def analysis_offset(self) -> float:
        """Analysis start in seconds since the open."""
        return self.analysis_start - self.open_time

    @classmethod
    def from_config(cls, cfg: Config) -> "SessionSpec":
        d = cls()
        return cls(
            open_time=parse_clock(cfg.get("session.open", "")) if cfg.get("session.open") else d.open_time,
            close_time=parse_clock(cfg.get("session.close", "")) if cfg.get("session.close") else d.close_time,
            analysis_start=(parse_clock(cfg.get("session.analysis_start", ""))
                            if cfg.get("session.analysis_start") else d.analysis_start),
        )


@dataclass(frozen=True)
class TradeEvent:
    timestamp: int
    price: float
    quantity: int
    side: int
    buyer_category: TraderCategory
    seller_category: TraderCategory
    stock_id: str = ""
    date: str = ""

    @property
    def value(self) -> float:
        return self.quantity * self.price

    @property
    def aggressor(self) -> TraderCategory:
        return self.buyer_category if self.side == 1 else self.seller_category

    @property
    def passive(self) -> TraderCategory:
        return self.seller_category if self.side == 1 else self.buyer_category


@dataclass(frozen=True)
class QuoteEvent:
    timestamp: int
    bid: float
    ask: float
    stock_id: str = ""
    date: str = ""

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.bid + self.ask)

    @property
    def spread_pct(self) -> float:
        return (self.ask - self.bid) / self.midpoint


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DayTape:
    """All trades and quotes of one stock on one day, column-wise and read-only."""

    stock: str
    date: str
    trade_ts: np.ndarray
    price: np.ndarray
    quantity: np.ndarray
    side: np.ndarray
    buyer: np.ndarray
    seller: np.ndarray
    quote_ts: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    bid: np.ndarray = field(default_factory=lambda: np.zeros(0))
    ask: np.ndarray = field(default_factory=lambda: np.zeros(0))
    warnings: int = 0

    def __post_init__(self):
        for name in ("trade_ts", "price", "quantity", "side", "buyer", "seller",
                     "quote_ts", "bid", "ask"):
            _readonly(getattr(self, name))

    @property
    def n_trades(self) -> int:
        return int(self.trade_ts.size)

    @property
    def value(self) -> np.ndarray:
        return self.price * self.quantity

    @property
    def n_other(self) -> int:
        other = TraderCategory.OTHER
        return int(np.count_nonzero((self.buyer == other) | (self.seller == other)))

    def trades(self) -> Iterator[TradeEvent]:
        for i in range(self.n_trades):
            yield TradeEvent(int(self.trade_ts[i]), float(self.price[i]),
                             int(self.quantity[i]), int(self.side[i]),
                             TraderCategory(int(self.buyer[i])),
                             TraderCategory(int(self.seller[i])),
                             self.stock, self.date)

    def quotes(self) -> Iterator[QuoteEvent]:
        for i in range(self.quote_ts.size):
            yield QuoteEvent(int(self.quote_ts[i]), float(self.bid[i]),
                             float(self.ask[i]), self.stock, self.date)

    @classmethod
    def from_events(cls, stock: str, date: str, trades: Iterable[TradeEvent],
                    quotes: Iterable[QuoteEvent] = ()) -> "DayTape":
        trades = list(trades)
        quotes = list(quotes)
        return cls(
            stock, date,
            np.array([t.timestamp for t in trades], dtype=np.int64),
            np.array([t.price for t in trades], dtype=float),
            np.array([t.quantity for t in trades], dtype=np.int64),
            np.array([t.side for t in trades], dtype=np.int8),
            np.array([int(t.buyer_category) for t in trades], dtype=np.int8),
            np.array([int(t.seller_category) for t in trades], dtype=np.int8),
            np.array([q.timestamp for q in quotes], dtype=np.int64),
            np.array([q.bid for q in quotes], dtype=float),
            np.array([q.ask for q in quotes], dtype=float),
        )


def _fmt(x: float) -> str:
    return repr(float(x))


def write_events(tape: DayTape, path: str | Path | None = None) -> str:
    """Serialize a tape in canonical form: trades and quotes merged by timestamp,
    trades first on equal stamps, shortest round-trip float formatting."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    ti, qi = 0, 0
    nt, nq = tape.n_trades, tape.quote_ts.size
    while ti < nt or qi < nq:
        if qi >= nq or (ti < nt and tape.trade_ts[ti] <= tape.quote_ts[qi]):
            w.writerow([int(tape.trade_ts[ti]), "TRADE", _fmt(tape.price[ti]),
                        int(tape.quantity[ti]), int(tape.side[ti]),
                        TraderCategory(int(tape.buyer[ti])).name,
                        TraderCategory(int(tape.seller[ti])).name, "", ""])
            ti += 1
        else:
            w.writerow([int(tape.quote_ts[qi]), "QUOTE", "", "", "", "", "",
                        _fmt(tape.bid[qi]), _fmt(tape.ask[qi])])
            qi += 1
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def event_filename(stock: str, date: str) -> str:
    return f"{stock}_{date}.csv"


def _bad(lineno: int, msg: str) -> EventFileError:
    return EventFileError(f"line {lineno}: {msg}")


def read_events(path: str | Path, session: SessionSpec | None = None) -> DayTape:
    """Parse and validate one event file.

    Malformed rows and non-monotone timestamps raise :class:`EventFileError`;
    unknown category strings map to ``OTHER`` and are counted in ``warnings``.
    """
    path = Path(path)
    m = FILENAME_RE.match(path.name)
    if not m:
        raise EventFileError(f"{path.name}: expected <STOCK>_<YYYYMMDD>.csv")
    stock, date = m.group("stock"), m.group("date")
    limit = None if session is None else int(round(session.duration * US))

    t_ts, t_px, t_q, t_s, t_b, t_sl = [], [], [], [], [], []
    q_ts, q_b, q_a = [], [], []
    warnings = 0
    last_ts = -1
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != HEADER:
            raise _bad(1, f"header must be {','.join(HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(HEADER):
                raise _bad(lineno, f"expected {len(HEADER)} fields, got {len(row)}")
            try:
                ts = int(row[0])
            except ValueError:
                raise _bad(lineno, f"bad timestamp {row[0]!r}") from None
            if ts < 0 or (limit is not None and ts > limit):
                raise _bad(lineno, f"timestamp {ts} outside the session")
            if ts < last_ts:
                raise _bad(lineno, f"timestamp {ts} decreases (previous {last_ts})")
            last_ts = ts
            kind = row[1].strip().upper()
            if kind == "TRADE":
                try:
                    price = float(row[2])
                    qty_f = float(row[3])
                    side = int(row[4])
                except ValueError:
                    raise _bad(lineno, "non-numeric price, quantity or side") from None
                if not (math.isfinite(price) and price > 0):
                    raise _bad(lineno, f"price must be > 0, got {row[2]!r}")
                if not (qty_f > 0 and qty_f == int(qty_f)):
                    raise _bad(lineno, f"quantity must be a positive integer, got {row[3]!r}")
                if side not in (1, -1):
                    raise _bad(lineno, f"side must be +1 or -1, got {row[4]!r}")
                if row[7].strip() or row[8].strip():
                    raise _bad(lineno, "TRADE rows leave bid/ask empty")
                cats = []
                for raw in (row[5], row[6]):
                    if not raw.strip():
                        raise _bad(lineno, "missing trader category")
                    cat = TraderCategory.parse(raw)
                    if cat is TraderCategory.OTHER and raw.strip().upper() != "OTHER":
                        warnings += 1
                    cats.append(cat)
                t_ts.append(ts)
                t_px.append(price)
                t_q.append(int(qty_f))
                t_s.append(side)
                t_b.append(int(cats[0]))
                t_sl.append(int(cats[1]))
            elif kind == "QUOTE":
                if any(row[i].strip() for i in (2, 3, 4, 5, 6)):
                    raise _bad(lineno, "QUOTE rows leave trade fields empty")
                try:
                    bid = float(row[7])
                    ask = float(row[8])
                except ValueError:
                    raise _bad(lineno, "non-numeric bid or ask") from None
                if not (bid > 0 and ask > bid):
                    raise _bad(lineno, f"need 0 < bid < ask, got {bid}, {ask}")
                q_ts.append(ts)
                q_b.append(bid)
                q_a.append(ask)
            else:
                raise _bad(lineno, f"type must be TRADE or QUOTE, got {row[1]!r}")

    if warnings:
        logger.warning("%s: %d unknown trader categories mapped to OTHER",
                       path.name, warnings)
    return DayTape(
        stock, date,
        np.array(t_ts, dtype=np.int64), np.array(t_px, dtype=float),
        np.array(t_q, dtype=np.int64), np.array(t_s, dtype=np.int8),
        np.array(t_b, dtype=np.int8), np.array(t_sl, dtype=np.int8),
        np.array(q_ts, dtype=np.int64), np.array(q_b, dtype=float),
        np.array(q_a, dtype=float), warnings,
    )


def ingest_events(directory: str | Path,
                  session: SessionSpec | None = None) -> dict[tuple[str, str], DayTape]:
    """Load every ``<STOCK>_<YYYYMMDD>.csv`` under ``directory``, keyed by (stock, date)."""
    out: dict[tuple[str, str], DayTape] = {}
    paths = sorted(p for p in Path(directory).iterdir() if FILENAME_RE.match(p.name))
    for p in paths:
        tape = read_events(p, session)
        out[(tape.stock, tape.date)] = tape
        logger.info("%s: %d trades, %d quotes, %d OTHER, %d warnings", p.name,
                    tape.n_trades, tape.quote_ts.size, tape.n_other, tape.warnings)
    return out


def session_grid(session: SessionSpec, step: float) -> np.ndarray:
    """Interval end instants (seconds since the open) of the uniform grid.

    Interval ``k`` is ``(k*step, (k+1)*step]``; a trailing partial interval is dropped.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    n = int(math.floor(session.duration / step + 1e-9))
    return step * np.arange(1, n + 1, dtype=float)


def interval_index(ts_us: np.ndarray, step: float, n_intervals: int) -> np.ndarray:
    """Right-closed interval index of each microsecond stamp; -1 past the grid.

    A stamp exactly at the open belongs to the first interval.
    """
    step_us = int(round(step * US))
    ts = np.asarray(ts_us, dtype=np.int64)
    idx = (ts + step_us - 1) // step_us - 1
    idx = np.maximum(idx, 0)
    idx[idx >= n_intervals] = -1
    return idx
