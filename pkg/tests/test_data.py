import pathlib
import tempfile

import numpy as np
import pytest
from hypothesis import given, strategies as st

from driftburst.data import (CATEGORIES, DMM_CATEGORIES, NON_HFT, DayTape, EventFileError,
                             SessionSpec, TradeEvent, TraderCategory, ingest_events,
                             interval_index, read_events, session_grid, write_events)

from conftest import random_tape

HEADER = "timestamp_us,type,price,quantity,side,buyer_cat,seller_cat,bid,ask\n"


def _write(tmp_path, body, name="ABC_20130102.csv"):
    p = tmp_path / name
    p.write_text(HEADER + body, encoding="utf-8")
    return p


def test_taxonomy():
    assert len(CATEGORIES) == 9
    assert [c for c in TraderCategory if c.is_dmm] == [TraderCategory.PURE_HFT_MM, TraderCategory.IB_HFT_MM]
    assert set(DMM_CATEGORIES) == {TraderCategory.PURE_HFT_MM, TraderCategory.IB_HFT_MM}
    assert NON_HFT == {TraderCategory.NON_HFT_CLIENT, TraderCategory.NON_HFT_OWN}
    assert TraderCategory.parse("ib-hft mm") is TraderCategory.IB_HFT_MM
    assert TraderCategory.parse("nobody") is TraderCategory.OTHER


def test_trade_event_roles():
    t = TradeEvent(0, 5.0, 10, -1, TraderCategory.NON_HFT_OWN, TraderCategory.IB_HFT_OWN)
    assert t.value == 50.0
    assert t.aggressor is TraderCategory.IB_HFT_OWN
    assert t.passive is TraderCategory.NON_HFT_OWN


def test_session_spec_validation():
    with pytest.raises(ValueError):
        SessionSpec(9 * 3600.0, 17.5 * 3600.0, 9 * 3600.0)
    assert SessionSpec().duration == 30600.0
    assert SessionSpec().analysis_offset == 1800.0


def test_three_valid_trades(tmp_path):
    p = _write(tmp_path, "1,TRADE,10.0,5,1,IB_HFT_MM,NON_HFT_OWN,,\n"
                         "2,TRADE,10.1,5,-1,PURE_CLIENT,IB_CLIENT,,\n"
                         "3,QUOTE,,,,,,9.9,10.1\n"
                         "3,TRADE,10.0,7,1,IB_HFT_OWN,PURE_HFT_MM,,\n")
    tape = read_events(p)
    assert tape.n_trades == 3 and tape.quote_ts.size == 1
    assert tape.warnings == 0
    assert (tape.stock, tape.date) == ("ABC", "20130102")


def test_zero_quantity_names_row(tmp_path):
    p = _write(tmp_path, "1,TRADE,10.0,5,1,IB_HFT_MM,NON_HFT_OWN,,\n2,TRADE,10.0,0,1,IB_HFT_MM,NON_HFT_OWN,,\n")
    with pytest.raises(EventFileError, match="line 3"):
        read_events(p)


def test_unknown_category_goes_to_other(tmp_path):
    p = _write(tmp_path, "1,TRADE,10.0,5,1,UNKNOWN,NON_HFT_OWN,,\n")
    tape = read_events(p)
    assert tape.warnings == 1
    assert tape.buyer[0] == TraderCategory.OTHER
    assert tape.n_other == 1


@pytest.mark.parametrize("body, msg", [
    ("5,TRADE,10.0,5,1,IB_HFT_MM,NON_HFT_OWN,,\n4,TRADE,10.0,5,1,IB_HFT_MM,NON_HFT_OWN,,\n", "decreases"),
    ("1,TRADE,-1,5,1,IB_HFT_MM,NON_HFT_OWN,,\n", "price"),
    ("1,TRADE,10.0,5,0,IB_HFT_MM,NON_HFT_OWN,,\n", "side"),
    ("1,QUOTE,,,,,,10.1,10.0\n", "bid"),
    ("1,FILL,10.0,5,1,IB_HFT_MM,NON_HFT_OWN,,\n", "TRADE or QUOTE"),
    ("1,TRADE,10.0,5,1\n", "fields"),
])
def test_malformed_rows(tmp_path, body, msg):
    with pytest.raises(EventFileError, match=msg):
        read_events(_write(tmp_path, body))


def test_bad_filename(tmp_path):
    with pytest.raises(EventFileError):
        read_events(_write(tmp_path, "", name="nodate.csv"))


def test_ingest_directory(tmp_path):
    for i, name in enumerate(["AAA_20130102.csv", "BBB_20130102.csv"]):
        write_events(random_tape(i, 20, stock=name[:3]), tmp_path / name)
    (tmp_path / "notes.txt").write_text("ignored")
    tapes = ingest_events(tmp_path, SessionSpec())
    assert sorted(tapes) == [("AAA", "20130102"), ("BBB", "20130102")]


def test_session_grid_counts():
    s = SessionSpec()
    assert session_grid(s, 10.0).size == 3060
    assert session_grid(s, 1.0).size == 30600
    # 8.5 hours do not divide into 7-second steps: the partial interval is dropped
    assert session_grid(s, 7.0).size == 4371
    with pytest.raises(ValueError):
        session_grid(s, 0.0)


def test_boundary_event_closes_interval():
    idx = interval_index(np.array([0, 10_000_000, 10_000_001, 20_000_000]), 10.0, 3060)
    assert idx.tolist() == [0, 0, 1, 1]


@given(st.integers(0, 10_000))
def test_round_trip_is_byte_identical(seed):
    tape = random_tape(seed, 40, n_quotes=10)
    text = write_events(tape)
    with tempfile.TemporaryDirectory() as d:
        p = pathlib.Path(d) / "RND_20130102.csv"
        p.write_text(text, encoding="utf-8")
        back = read_events(p)
    assert write_events(back) == text
    np.testing.assert_array_equal(back.price, tape.price)
    np.testing.assert_array_equal(back.buyer, tape.buyer)


@given(st.lists(st.integers(0, 30_600_000_000), min_size=1, max_size=200),
       st.sampled_from([1.0, 10.0, 60.0]))
def test_partition(stamps, step):
    ts = np.sort(np.array(stamps, dtype=np.int64))
    grid = session_grid(SessionSpec(), step)
    idx = interval_index(ts, step, grid.size)
    assert np.all((idx >= 0) & (idx < grid.size))
    counts = np.bincount(idx, minlength=grid.size)
    assert counts.sum() == ts.size
    # every stamp lies in (end - step, end] of its interval, the open itself in the first
    end = grid[idx] * 1e6
    assert np.all(ts <= end + 1e-6)
    assert np.all((ts > end - step * 1e6 - 1e-6) | (ts == 0))


def test_tape_columns_read_only(tape):
    with pytest.raises(ValueError):
        tape.price[0] = 1.0


def test_from_events_matches_columns():
    trades = [TradeEvent(5, 10.0, 3, 1, TraderCategory.IB_HFT_MM, TraderCategory.PURE_CLIENT, "X", "20130102")]
    tape = DayTape.from_events("X", "20130102", trades)
    assert list(tape.trades()) == trades
