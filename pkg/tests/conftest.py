import pathlib

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from driftburst.cli import main
from driftburst.data import N_CODES, DayTape, SessionSpec

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_tape(seed: int, n_trades: int = 1000, stock: str = "RND", date: str = "20130102",
                session: SessionSpec = SessionSpec(), with_other: bool = True,
                n_quotes: int = 50) -> DayTape:
    """Uniform random tape; categories drawn over all codes (OTHER included)."""
    rng = np.random.default_rng(seed)
    dur_us = int(session.duration * 1e6)
    ts = np.sort(rng.integers(0, dur_us + 1, n_trades))
    price = np.round(20.0 * np.exp(np.cumsum(rng.normal(0, 5e-4, n_trades))), 3)
    qty = rng.integers(1, 500, n_trades)
    side = rng.choice(np.array([-1, 1], dtype=np.int8), n_trades)
    hi = N_CODES if with_other else N_CODES - 1
    buyer = rng.integers(0, hi, n_trades).astype(np.int8)
    seller = rng.integers(0, hi, n_trades).astype(np.int8)
    qts = np.sort(rng.integers(0, dur_us + 1, n_quotes))
    mid = 20.0 * np.exp(rng.normal(0, 1e-3, n_quotes))
    bid = np.round(mid - 0.01, 3)
    ask = np.round(mid + 0.01, 3)
    return DayTape(stock, date, ts.astype(np.int64), price, qty.astype(np.int64), side,
                   buyer, seller, qts.astype(np.int64), bid, ask)


@pytest.fixture
def tape():
    return random_tape(0)


ROOT = pathlib.Path(__file__).resolve().parent.parent
MODELS = ("var", "pnl", "cross", "ecm")


def run_pipeline(out: pathlib.Path, scenario: pathlib.Path = ROOT / "scenarios" / "example.cfg",
                 config: pathlib.Path = ROOT / "scenarios" / "detect.cfg") -> list[int]:
    """Every CLI subcommand in order; returns the exit codes."""
    data, events = out / "data", out / "events.csv"
    codes = [main(["simulate", "--scenario", str(scenario), "--out", str(data)]),
             main(["detect", "--input", str(data), "--config", str(config), "--out", str(events)]),
             main(["measure", "--events", str(events), "--input", str(data), "--config", str(config),
                   "--out-dir", str(out / "metrics")])]
    for model in MODELS:
        codes.append(main(["regress", "--metrics", str(out / "metrics"), "--events", str(events),
                           "--model", model, "--pool", "all", "--config", str(config),
                           "--out", str(out / "tables" / f"{model}.csv")]))
    codes.append(main(["report", "--metrics", str(out / "metrics"), "--regress-dir", str(out / "tables"),
                       "--out-dir", str(out / "report")]))
    return codes


def tree_bytes(root: pathlib.Path) -> dict[str, bytes]:
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


ACCEPTANCE: list[str] = []


def record(number: int, title: str, passed: bool, detail: str) -> bool:
    ACCEPTANCE.append(f"[{'PASS' if passed else 'FAIL'}] {number:>2}. {title}: {detail}")
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split(".")[0].split()[-1])):
            terminalreporter.write_line(line)
