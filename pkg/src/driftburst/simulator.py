"""Synthetic markets with injected drift bursts and scripted trader categories.

The efficient log-price follows a Brownian motion with optional jumps, a
smooth intraday volatility ramp and, around each injected burst, a drift
``-a * (tau - t) ** -alpha`` that is integrated exactly over each Euler step.
Trades arrive as a Poisson stream and print at the efficient price plus
Gaussian noise, rounded to the tick. Buyer and seller categories come from
per-phase agent scripts.
"""

from __future__ import annotations

import csv
import io
import math
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .config import Config, ConfigError, parse_clock
from .data import (N_CODES, DayTape, SessionSpec, TraderCategory,
                   event_filename, interval_index, session_grid, write_events)
from .detector import KernelSpec, detect_tape

SIM_PHASES = ("normal", "pre_event", "early", "intermediate", "late", "recovery")
SCRIPTS = ("unsystematic", "systematic")

C = TraderCategory

BASELINE_WEIGHTS = {
    C.PURE_HFT_MM: 0.20, C.PURE_HFT_OWN: 0.05, C.PURE_CLIENT: 0.03,
    C.IB_HFT_MM: 0.12, C.IB_HFT_OWN: 0.10, C.IB_HFT_PARENT: 0.05,
    C.IB_CLIENT: 0.15, C.NON_HFT_CLIENT: 0.20, C.NON_HFT_OWN: 0.095,
    C.OTHER: 0.005,
}
BASELINE_AGGRESSION = {c: 0.5 for c in TraderCategory}
BASELINE_AGGRESSION.update({C.PURE_HFT_MM: 0.3, C.IB_HFT_MM: 0.3, C.IB_HFT_OWN: 0.7})


@dataclass(frozen=True)
class AgentPhase:
    """Who trades in one phase: buy and sell participation plus aggressiveness.

    The buyer of each trade is drawn from ``buy``, the seller from ``sell``;
    the trade is buyer-initiated with probability ``a_b / (a_b + a_s)``.
    """

    buy: np.ndarray
    sell: np.ndarray
    aggression: np.ndarray

    def __post_init__(self):
        for name in ("buy", "sell"):
            w = np.asarray(getattr(self, name), dtype=float)
            if w.shape != (N_CODES,) or np.any(w < 0) or not math.isclose(w.sum(), 1.0, abs_tol=1e-9):
                raise ValueError(f"{name} weights must be {N_CODES} non-negative values summing to 1")
            object.__setattr__(self, name, w)
        a = np.asarray(self.aggression, dtype=float)
        if a.shape != (N_CODES,) or np.any(a <= 0) or np.any(a >= 1):
            raise ValueError("aggressiveness must lie in (0, 1)")
        object.__setattr__(self, "aggression", a)

    def blend(self, other: "AgentPhase", intensity: float) -> "AgentPhase":
        """Move ``intensity`` of the way from ``self`` toward ``other``."""
        lam = float(np.clip(intensity, 0.0, 1.0))
        mix = lambda a, b: (1 - lam) * a + lam * b
        return AgentPhase(mix(self.buy, other.buy), mix(self.sell, other.sell),
                          mix(self.aggression, other.aggression))


def _vector(mapping: dict) -> np.ndarray:
    out = np.zeros(N_CODES)
    for cat, w in mapping.items():
        out[int(cat)] = w
    return out


def _shifted(weights: dict, changes: dict) -> np.ndarray:
    """Apply additive changes and renormalize."""
    w = dict(weights)
    for cat, delta in changes.items():
        w[cat] = w[cat] + delta
    v = _vector(w)
    return v / v.sum()


def _phase(buy_changes=None, sell_changes=None, aggression=None) -> AgentPhase:
    agg = dict(BASELINE_AGGRESSION)
    agg.update(aggression or {})
    return AgentPhase(_shifted(BASELINE_WEIGHTS, buy_changes or {}),
                      _shifted(BASELINE_WEIGHTS, sell_changes or {}),
                      _vector(agg))


def default_scripts() -> dict[tuple[str, str], AgentPhase]:
    """The narrative scripts used for validation.

    Informed sellers (IB_HFT_OWN) lean on the book early and intermediate.
    In unsystematic drops the DMM categories absorb that flow as passive
    buyers; in systematic drops they turn into aggressive sellers in the late
    stage while non-HFT investors buy. Non-HFT investors also buy the recovery.
    """
    base = _phase()
    informed = {C.IB_HFT_OWN: 0.15}
    dmm_buy = {C.IB_HFT_MM: 0.12, C.PURE_HFT_MM: 0.08}
    dmm_sell = {C.IB_HFT_MM: 0.12, C.PURE_HFT_MM: 0.08}
    non_hft = {C.NON_HFT_CLIENT: 0.12, C.NON_HFT_OWN: 0.06}
    passive_mm = {C.IB_HFT_MM: 0.15, C.PURE_HFT_MM: 0.15, C.IB_HFT_OWN: 0.85}
    scripts = {}
    for name in SCRIPTS:
        scripts[(name, "normal")] = base
        scripts[(name, "pre_event")] = base
        scripts[(name, "recovery")] = _phase(buy_changes=non_hft)
    for phase in ("early", "intermediate", "late"):
        scripts[("unsystematic", phase)] = _phase(dmm_buy, informed, passive_mm)
    for phase in ("early", "intermediate"):
        scripts[("systematic", phase)] = _phase(dmm_buy, informed, passive_mm)
    scripts[("systematic", "late")] = _phase(
        non_hft, {**dmm_sell, **informed},
        {C.IB_HFT_MM: 0.85, C.PURE_HFT_MM: 0.85, C.NON_HFT_CLIENT: 0.2, C.NON_HFT_OWN: 0.2})
    return scripts


@dataclass(frozen=True)
class Burst:
    """One injected drift burst. ``tau`` is in seconds since the open and
    ``magnitude`` is the signed log-return accumulated over ``duration``."""

    stock: str
    date: str
    tau: float
    magnitude: float = -0.0135
    duration: float = 572.0
    alpha: float = 0.75
    recovery: float = 0.5
    script: str = "unsystematic"
    intensity: float = 1.0

    def __post_init__(self):
        if not 0.5 < self.alpha < 1:
            raise ValueError("alpha must lie in (0.5, 1)")
        if self.duration <= 0:
            raise ValueError("burst duration must be positive")
        if not 0 <= self.recovery <= 1:
            raise ValueError("recovery fraction must lie in [0, 1]")
        if self.script not in SCRIPTS:
            raise ValueError(f"unknown script {self.script!r}")

    @property
    def t_start(self) -> float:
        return self.tau - self.duration

    @property
    def drift_scale(self) -> float:
        """``a`` in ``mu_t = -a (tau - t) ** -alpha``."""
        return -self.magnitude * (1 - self.alpha) / self.duration ** (1 - self.alpha)

    def cumulative_drift(self, t: np.ndarray) -> np.ndarray:
        """Integrated burst drift plus linear recovery at instants ``t``."""
        s = np.clip((self.tau - t) / self.duration, 0.0, 1.0)
        drop = self.magnitude * (1.0 - s ** (1.0 - self.alpha))
        back = -self.recovery * self.magnitude * np.clip((t - self.tau) / (3 * self.duration), 0.0, 1.0)
        return drop + back

    def phase_of(self, t: np.ndarray) -> np.ndarray:
        """Index into :data:`SIM_PHASES` for instants ``t`` (0 outside the window)."""
        d = self.duration
        edges = [self.t_start - 2 * d, self.t_start, self.t_start + d / 3,
                 self.t_start + 2 * d / 3, self.tau, self.tau + 3 * d]
        idx = np.searchsorted(edges, t, side="left")
        return np.where((idx >= 1) & (idx <= 5), idx, 0)


@dataclass(frozen=True)
class SimScenario:
    stocks: tuple[str, ...] = ("SIM",)
    dates: tuple[str, ...] = ("20240102",)
    sigma_daily: float = 0.02
    noise: float = 1e-4
    tick: float = 0.001
    trade_rate: float = 0.5
    burst_activity: float = 3.2
    quote_interval: float = 5.0
    half_spread: float = 3e-4
    start_price: float = 20.0
    mean_quantity: float = 150.0
    jump_rate: float = 0.0
    jump_sd: float = 0.002
    vol_ramp: float = 1.0
    ramp_width: float = 600.0
    dt: float = 0.1
    seed: int = 0
    session: SessionSpec = SessionSpec()
    bursts: tuple[Burst, ...] = ()
    days: tuple[tuple[str, str], ...] = ()
    scripts: dict = field(default_factory=default_scripts, compare=False)

    def __post_init__(self):
        if self.sigma_daily < 0 or self.noise < 0:
            raise ValueError("volatility and noise must be non-negative")
        if self.trade_rate <= 0 or self.quote_interval <= 0 or self.jump_rate < 0:
            raise ValueError("rates must be positive")
        if self.tick <= 0 or self.dt <= 0 or self.start_price <= 0:
            raise ValueError("tick, dt and start price must be positive")
        if self.burst_activity < 1:
            raise ValueError("burst_activity must be at least 1")
        if self.vol_ramp <= 0:
            raise ValueError("vol_ramp must be positive")

    def day_keys(self) -> list[tuple[str, str]]:
        """Explicit ``days`` if given, else every stock on every date."""
        if self.days:
            return list(self.days)
        return [(s, d) for d in self.dates for s in self.stocks]

    def bursts_for(self, stock: str, date: str) -> list[Burst]:
        return [b for b in self.bursts if b.stock == stock and b.date == date]

    def rng(self, stock: str, date: str) -> np.random.Generator:
        digits = int(date) if date.isdigit() else zlib.crc32(date.encode())
        ss = np.random.SeedSequence([self.seed, zlib.crc32(stock.encode()), digits])
        return np.random.default_rng(ss)

    def vol_multiplier(self, t: np.ndarray) -> np.ndarray:
        """Logistic ramp from 1 to ``vol_ramp`` centred on mid-session."""
        if self.vol_ramp == 1.0:
            return np.ones_like(t)
        mid = 0.5 * self.session.duration
        return 1.0 + (self.vol_ramp - 1.0) / (1.0 + np.exp(-(t - mid) / self.ramp_width))


@dataclass
class SimTruth:
    """Ground truth of one simulation: injected windows, the efficient price on
    the 1-second clock and the true per-category signed flow per 10 seconds."""

    bursts: list[Burst]
    efficient: dict[tuple[str, str], np.ndarray]
    flows: dict[tuple[str, str], np.ndarray]


@dataclass
class SimResult:
    tapes: dict[tuple[str, str], DayTape]
    truth: SimTruth


def _round_tick(p: np.ndarray, tick: float) -> np.ndarray:
    inv = 1.0 / tick
    if abs(inv - round(inv)) < 1e-9:
        # division by an integer gives the double nearest the decimal value
        return np.maximum(np.rint(p * inv), 1.0) / round(inv)
    return np.maximum(np.rint(p / tick), 1.0) * tick


def simulate_day(scenario: SimScenario, stock: str, date: str) -> tuple[DayTape, np.ndarray]:
    """One (stock, date) tape plus the efficient log-price path on the Euler grid."""
    rng = scenario.rng(stock, date)
    dur = scenario.session.duration
    n_steps = int(round(dur / scenario.dt))
    grid = scenario.dt * np.arange(n_steps + 1)
    step_sd = scenario.sigma_daily / math.sqrt(dur) * math.sqrt(scenario.dt)
    mid_t = grid[:-1] + 0.5 * scenario.dt
    incr = step_sd * scenario.vol_multiplier(mid_t) * rng.standard_normal(n_steps)
    if scenario.jump_rate > 0:
        n_jumps = rng.poisson(scenario.jump_rate * scenario.dt / dur, n_steps)
        incr += np.sqrt(n_jumps) * scenario.jump_sd * rng.standard_normal(n_steps)
    x = np.concatenate(([0.0], np.cumsum(incr)))
    bursts = scenario.bursts_for(stock, date)
    for b in bursts:
        x += b.cumulative_drift(grid)
    x += math.log(scenario.start_price)

    u = rng.uniform(0.0, dur, rng.poisson(scenario.trade_rate * dur))
    extra = scenario.trade_rate * (scenario.burst_activity - 1.0)
    for b in bursts:
        lo, hi = max(b.t_start, 0.0), min(b.tau, dur)
        if extra > 0 and hi > lo:
            u = np.concatenate((u, rng.uniform(lo, hi, rng.poisson(extra * (hi - lo)))))
    u = np.sort(u)
    n_trades = u.size
    ts = np.clip(np.floor(u * 1e6).astype(np.int64), 0, int(round(dur * 1e6)))
    at = np.minimum((ts / 1e6 / scenario.dt).astype(np.int64), n_steps)
    noisy = x[at] + scenario.noise * rng.standard_normal(n_trades)
    price = _round_tick(np.exp(noisy), scenario.tick)
    qty = np.maximum(1, np.rint(rng.lognormal(math.log(scenario.mean_quantity), 0.8, n_trades))).astype(np.int64)

    # phase per trade: the script of the last burst covering the trade wins
    plan = [scenario.scripts[("unsystematic", "normal")]]
    which = np.zeros(n_trades, dtype=np.int64)
    t_sec = ts / 1e6
    for b in bursts:
        ph = b.phase_of(t_sec)
        base = len(plan)
        for name in SIM_PHASES[1:]:
            plan.append(plan[0].blend(scenario.scripts[(b.script, name)], b.intensity))
        which = np.where(ph > 0, base + ph - 1, which)
    buy_cdf = np.cumsum(np.vstack([p.buy for p in plan]), axis=1)
    sell_cdf = np.cumsum(np.vstack([p.sell for p in plan]), axis=1)
    aggr = np.vstack([p.aggression for p in plan])
    ub, us, ua = rng.uniform(size=(3, n_trades))
    buyer = np.minimum((ub[:, None] > buy_cdf[which]).sum(axis=1), N_CODES - 1)
    seller = np.minimum((us[:, None] > sell_cdf[which]).sum(axis=1), N_CODES - 1)
    a_b = aggr[which, buyer]
    a_s = aggr[which, seller]
    side = np.where(ua < a_b / (a_b + a_s), 1, -1)

    q_ts = np.arange(scenario.quote_interval, dur + 1e-9, scenario.quote_interval)
    q_at = np.minimum((q_ts / scenario.dt).astype(np.int64), n_steps)
    mid = np.exp(x[q_at])
    bid = np.floor(mid * (1 - scenario.half_spread) / scenario.tick) * scenario.tick
    ask = np.ceil(mid * (1 + scenario.half_spread) / scenario.tick) * scenario.tick
    bid = _round_tick(np.maximum(bid, scenario.tick), scenario.tick)
    ask = _round_tick(np.maximum(ask, bid + scenario.tick), scenario.tick)

    tape = DayTape(stock, date, ts, price, qty, side.astype(np.int8),
                   buyer.astype(np.int8), seller.astype(np.int8),
                   np.rint(q_ts * 1e6).astype(np.int64), bid, ask)
    return tape, x


def true_flows(tape: DayTape, session: SessionSpec, step: float = 10.0) -> np.ndarray:
    """Signed traded value per (interval, category code), buyer positive."""
    n = session_grid(session, step).size
    idx = interval_index(tape.trade_ts, step, n)
    keep = idx >= 0
    out = np.zeros((n, N_CODES))
    v = tape.value[keep]
    np.add.at(out, (idx[keep], tape.buyer[keep].astype(np.int64)), v)
    np.add.at(out, (idx[keep], tape.seller[keep].astype(np.int64)), -v)
    return out


def simulate(scenario: SimScenario) -> SimResult:
    tapes, efficient, flows = {}, {}, {}
    every = int(round(1.0 / scenario.dt))
    for stock, date in scenario.day_keys():
        tape, x = simulate_day(scenario, stock, date)
        tapes[(stock, date)] = tape
        efficient[(stock, date)] = x[::every].copy()
        flows[(stock, date)] = true_flows(tape, scenario.session)
    return SimResult(tapes, SimTruth(list(scenario.bursts), efficient, flows))


TRUTH_HEADER = ["stock", "date", "t_start", "tau", "duration_s", "magnitude",
                "alpha", "recovery", "script", "intensity"]


def truth_csv(truth: SimTruth) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRUTH_HEADER)
    for b in truth.bursts:
        w.writerow([b.stock, b.date, repr(b.t_start), repr(b.tau), repr(b.duration),
                    repr(b.magnitude), repr(b.alpha), repr(b.recovery), b.script,
                    repr(b.intensity)])
    return buf.getvalue()


def write_simulation(result: SimResult, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for (stock, date), tape in sorted(result.tapes.items()):
        p = out / event_filename(stock, date)
        write_events(tape, p)
        paths.append(p)
    p = out / "truth.csv"
    p.write_text(truth_csv(result.truth), encoding="utf-8")
    paths.append(p)
    return paths


# ------------------------------------------------------------ scenario files

_FLOAT_KEYS = {
    "sigma_daily": "sigma_daily", "noise": "noise", "tick": "tick",
    "trade_rate": "trade_rate", "burst_activity": "burst_activity",
    "quote_interval_s": "quote_interval",
    "half_spread": "half_spread", "start_price": "start_price",
    "mean_quantity": "mean_quantity", "jump_rate": "jump_rate", "jump_sd": "jump_sd",
    "vol_ramp": "vol_ramp", "ramp_width_s": "ramp_width", "dt": "dt",
}


def _weights(text: str, base: np.ndarray, normalize: bool) -> np.ndarray:
    out = base.copy()
    for item in text.split(","):
        if not item.strip():
            continue
        name, _, val = item.partition(":")
        cat = TraderCategory.parse(name)
        if cat is TraderCategory.OTHER and name.strip().upper() != "OTHER":
            raise ConfigError(f"unknown trader category {name.strip()!r}")
        out[int(cat)] = float(val)
    if normalize:
        total = out.sum()
        if total <= 0:
            raise ConfigError("weights must have a positive sum")
        out = out / total
    return out


def scenario_from_config(cfg: Config) -> SimScenario:
    """Build a scenario from the flat ``key = value`` format.

    ``[burst]`` blocks take ``stock``, ``date``, ``at`` (wall clock) or
    ``tau_s`` (seconds since the open), and optional ``magnitude``,
    ``duration_s``, ``alpha``, ``recovery``, ``script``, ``intensity``.
    ``[agent]`` blocks take ``script``, ``phase`` and any of ``buy``, ``sell``,
    ``aggressiveness`` as ``CATEGORY:value`` lists that override the default
    script for that phase (participation is renormalized to sum to 1).
    """
    session = SessionSpec.from_config(cfg)
    kwargs: dict = {"session": session}
    for key, attr in _FLOAT_KEYS.items():
        if cfg.get(key) is not None:
            kwargs[attr] = cfg.get_float(key, 0.0)
    kwargs["seed"] = cfg.get_int("seed", 0)
    kwargs["stocks"] = tuple(cfg.get_list("stocks", ["SIM"]))
    kwargs["dates"] = tuple(cfg.get_list("dates", ["20240102"]))
    days = []
    for item in cfg.get_list("days"):
        stock, _, date = item.partition(":")
        if not date:
            raise ConfigError(f"days: expected STOCK:YYYYMMDD, got {item!r}")
        days.append((stock, date))
    kwargs["days"] = tuple(days)

    bursts = []
    for body in cfg.blocks_named("burst"):
        try:
            if "at" in body:
                tau = parse_clock(body["at"]) - session.open_time
            else:
                tau = float(body["tau_s"])
            bursts.append(Burst(
                stock=body["stock"], date=body["date"], tau=tau,
                magnitude=float(body.get("magnitude", -0.0135)),
                duration=float(body.get("duration_s", 572.0)),
                alpha=float(body.get("alpha", 0.75)),
                recovery=float(body.get("recovery", 0.5)),
                script=body.get("script", "unsystematic"),
                intensity=float(body.get("intensity", 1.0)),
            ))
        except KeyError as exc:
            raise ConfigError(f"[burst] block missing {exc.args[0]!r}") from None
        except ValueError as exc:
            raise ConfigError(f"[burst] block: {exc}") from None
    kwargs["bursts"] = tuple(bursts)

    scripts = default_scripts()
    for body in cfg.blocks_named("agent"):
        key = (body.get("script", "unsystematic"), body.get("phase", ""))
        if key not in scripts:
            raise ConfigError(f"[agent] block: unknown script/phase {key}")
        cur = scripts[key]
        try:
            scripts[key] = AgentPhase(
                _weights(body.get("buy", ""), cur.buy, True),
                _weights(body.get("sell", ""), cur.sell, True),
                _weights(body.get("aggressiveness", ""), cur.aggression, False))
        except ValueError as exc:
            raise ConfigError(f"[agent] block {key}: {exc}") from None
    kwargs["scripts"] = scripts
    try:
        return SimScenario(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


# ------------------------------------------------------------ batteries

@dataclass(frozen=True)
class NullReport:
    n_days: int
    n_events: int

    @property
    def per_thousand(self) -> float:
        return 1000.0 * self.n_events / self.n_days


def null_battery(scenario: SimScenario, n_days: int, barrier: float,
                 spec: KernelSpec = KernelSpec(), window: int = 5) -> NullReport:
    """Count detections on ``n_days`` burst-free stock-days."""
    if scenario.bursts:
        raise ValueError("null battery needs a scenario without bursts")
    n_events = 0
    for d in range(n_days):
        tape, _ = simulate_day(scenario, "NULL", f"{20000000 + d:08d}")
        _, seg = detect_tape(tape, barrier, spec, scenario.session, window)
        n_events += len(seg.events)
    return NullReport(n_days, n_events)


@dataclass(frozen=True)
class PowerReport:
    detected: np.ndarray
    timing_error: np.ndarray
    duration: np.ndarray
    realized_drop: np.ndarray

    @property
    def detection_rate(self) -> float:
        return float(np.mean(self.detected))

    @property
    def median_timing_error(self) -> float:
        err = self.timing_error[self.detected]
        return float(np.median(np.abs(err))) if err.size else math.nan


def power_battery(scenario: SimScenario, n_days: int, barrier: float,
                  burst: Burst | None = None, spec: KernelSpec = KernelSpec(),
                  window: int = 5, match_window: float = 600.0) -> PowerReport:
    """Inject one burst per stock-day and check that the detector finds it.

    A burst counts as detected when some event's trough lies within
    ``match_window`` seconds of the injected ``tau``; the closest such event
    supplies the timing error and the estimated duration.
    """
    template = burst or Burst("PWR", "", tau=0.6 * scenario.session.duration)
    detected = np.zeros(n_days, dtype=bool)
    err = np.full(n_days, np.nan)
    dur = np.full(n_days, np.nan)
    drop = np.full(n_days, np.nan)
    for d in range(n_days):
        date = f"{21000000 + d:08d}"
        b = replace(template, stock="PWR", date=date)
        sc = replace(scenario, bursts=(b,), stocks=("PWR",), dates=(date,))
        tape, x = simulate_day(sc, "PWR", date)
        k0 = int(round(b.t_start / sc.dt))
        k1 = int(round(b.tau / sc.dt))
        drop[d] = x[k1] - x[k0]
        _, seg = detect_tape(tape, barrier, spec, sc.session, window)
        near = [ev for ev in seg.events if abs(ev.t_trough - b.tau) <= match_window]
        if near:
            ev = min(near, key=lambda e: abs(e.t_trough - b.tau))
            detected[d] = True
            err[d] = ev.t_trough - b.tau
            dur[d] = ev.tau
    return PowerReport(detected, err, dur, drop)


def sign_battery_scenario(seed: int = 0, n_unsystematic: int = 20, n_systematic_dates: int = 5,
                          n_systematic_stocks: int = 14) -> SimScenario:
    """Scripted validation market: single-stock unsystematic bursts on separate
    dates plus simultaneous systematic crashes across many stocks.

    Unsystematic events rotate over the first ten stocks; every burst uses the
    calibrated default size and duration. Burst times are spread over the
    afternoon so the full event window fits in the session.
    """
    stocks = tuple(f"S{i:02d}" for i in range(1, n_systematic_stocks + 1))
    rng = np.random.default_rng(seed)
    bursts, days = [], []
    for j in range(n_unsystematic):
        date = f"{20130102 + 100 * (j // 20) + j % 20:08d}"
        stock = stocks[j % 10]
        tau = float(rng.uniform(12000.0, 26000.0))
        bursts.append(Burst(stock, date, tau, script="unsystematic"))
        days.append((stock, date))
    for j in range(n_systematic_dates):
        date = f"{20130601 + j:08d}"
        tau = float(rng.uniform(12000.0, 26000.0))
        for stock in stocks:
            bursts.append(Burst(stock, date, tau + float(rng.uniform(-20.0, 20.0)), script="systematic"))
            days.append((stock, date))
    return SimScenario(stocks=stocks, dates=tuple(sorted({d for _, d in days})), seed=seed,
                       bursts=tuple(bursts), days=tuple(days))
