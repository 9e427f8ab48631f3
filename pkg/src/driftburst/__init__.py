"""Drift-burst detection of extreme price movements and trader-category flow
analytics on tick data, with a synthetic market generator for validation."""

from .data import (CATEGORIES, DMM_CATEGORIES, NON_HFT, DayTape, QuoteEvent, SessionSpec,
                   TradeEvent, TraderCategory, ingest_events, read_events, session_grid,
                   write_events)
from .detector import (DriftBurstSeries, EpmEvent, KernelSpec, classify_systematic,
                       critical_value, db_statistic, detect_tape, drift_burst_series,
                       normalize_event_time, segment_events, spot_drift, spot_vol)
from .preprocess import PriceSeries, log_returns, periodicity_profile, preaverage
from .simulator import Burst, SimScenario, simulate

__version__ = "0.1.0"

__all__ = [
    "CATEGORIES", "DMM_CATEGORIES", "NON_HFT", "Burst", "DayTape", "DriftBurstSeries", "EpmEvent",
    "KernelSpec", "PriceSeries", "QuoteEvent", "SessionSpec", "SimScenario", "TradeEvent",
    "TraderCategory", "classify_systematic", "critical_value", "db_statistic", "detect_tape",
    "drift_burst_series", "ingest_events", "log_returns", "normalize_event_time",
    "periodicity_profile", "preaverage", "read_events", "segment_events", "session_grid",
    "simulate", "spot_drift", "spot_vol", "write_events",
]
