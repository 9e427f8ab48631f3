"""Summary tables and plot-ready data. Nothing here renders figures."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from .data import CATEGORIES
from .detector import PHASES, EpmEvent, normalize_event_time
from .econometrics import RegressionResult, stars

N_BINS = 21
BIN_SPAN = 4.0


def overlap_table(db_events: Sequence[EpmEvent], alternatives: dict[str, dict[tuple[str, str], np.ndarray]],
                  step: float = 10.0) -> pd.DataFrame:
    """Flag counts per stock and overlap with drift-burst events.

    ``alternatives`` maps a detector name to boolean flags per (stock, date)
    on the interval grid (pass the negative-return subset to mirror the
    downward comparison). An event overlaps when some flagged interval
    ``(k*step, (k+1)*step]`` meets ``[t_start, t_trough]``.
    """
    rows = []
    n_db = len(db_events)
    for name, flags in alternatives.items():
        stocks = sorted({k[0] for k in flags})
        per_stock = []
        per_stock_pct = []
        for s in stocks:
            f = [flags[k] for k in flags if k[0] == s]
            count = sum(int(np.count_nonzero(x)) for x in f)
            total = sum(x.size for x in f)
            per_stock.append(count)
            per_stock_pct.append(100.0 * count / total if total else 0.0)
        hits = 0
        for ev in db_events:
            f = flags.get(ev.key)
            if f is None:
                continue
            k = np.flatnonzero(f)
            lo = k * step
            if np.any((lo < ev.t_trough) & (lo + step >= ev.t_start)):
                hits += 1
        rows.append({
            "detector": name,
            "per_stock_count": round(float(np.mean(per_stock)) if per_stock else 0.0, 2),
            "per_stock_pct": round(float(np.mean(per_stock_pct)) if per_stock_pct else 0.0, 2),
            "overlap_count": hits,
            "overlap_pct": round(100.0 * hits / n_db, 2) if n_db else 0.0,
        })
    return pd.DataFrame(rows, columns=["detector", "per_stock_count", "per_stock_pct",
                                       "overlap_count", "overlap_pct"])


def normalized_grid(mean_duration: float, points_per_unit: int = 20) -> np.ndarray:
    """Average-elapsed-time grid from the pre-event start to the event end."""
    n = 6 * points_per_unit
    return mean_duration * (np.arange(n + 1) / points_per_unit - 2.0)


def curve_data(frames: dict[tuple[str, str], pd.DataFrame], events: Sequence[EpmEvent],
               mean_duration: float, categories: Sequence[str] | None = None,
               flavor: str = "TI", grid: np.ndarray | None = None) -> pd.DataFrame:
    """Mean cumulative imbalance per category on the average-elapsed-time axis.

    Each event's imbalance is cumulated from the pre-event instant, mapped to
    the normalized clock (in the unit of ``mean_duration``) and linearly
    interpolated onto ``grid`` before averaging across events.
    """
    cats = list(categories or [c.name for c in CATEGORIES])
    cols = ["category", "x", "mean_cum", "n_events"]
    if not events:
        return pd.DataFrame(columns=cols)
    x = normalized_grid(mean_duration) if grid is None else np.asarray(grid, float)
    acc = {c: np.zeros(x.size) for c in cats}
    for ev in events:
        f = frames[ev.key]
        t = f["t_end"].to_numpy()
        inside = (t > ev.t_pre_event + 1e-9) & (t <= ev.t_end + 1e-9)
        tx = np.concatenate(([ev.t_pre_event], t[inside]))
        xs = normalize_event_time(ev, mean_duration, tx)
        for c in cats:
            cum = np.concatenate(([0.0], np.cumsum(f[f"{flavor}_{c}"].to_numpy()[inside])))
            acc[c] += np.interp(x, xs, cum)
    out = []
    for c in cats:
        out.append(pd.DataFrame({"category": c, "x": x, "mean_cum": acc[c] / len(events),
                                 "n_events": len(events)}))
    return pd.concat(out, ignore_index=True)


def bin_edges(n_bins: int = N_BINS, span: float = BIN_SPAN) -> np.ndarray:
    return np.linspace(-span, span, n_bins + 1)


def _binned(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Counts with values outside the range folded into the edge bins."""
    v = np.clip(values[np.isfinite(values)], edges[0], edges[-1])
    return np.histogram(v, bins=edges)[0]


def one_minute_changes(frame: pd.DataFrame, category: str, steps: int = 6,
                       flavor: str = "TI") -> np.ndarray:
    """Imbalance accumulated over the trailing ``steps`` intervals at each
    interval end (NaN for the first ``steps - 1`` intervals)."""
    v = frame[f"{flavor}_{category}"].to_numpy(dtype=float)
    c = np.concatenate(([0.0], np.cumsum(v)))
    out = np.full(v.size, np.nan)
    out[steps - 1:] = c[steps:] - c[:-steps]
    return out


def histogram_data(frames: dict[tuple[str, str], pd.DataFrame], events: Sequence[EpmEvent],
                   categories: Sequence[str] | None = None, horizon: float = 60.0,
                   step: float = 10.0, flavor: str = "TI") -> pd.DataFrame:
    """Histograms of one-minute imbalance changes per phase.

    Changes are scaled by the stock's standard deviation of one-minute changes
    over all its loaded days; bins are shared across phases.
    """
    cats = list(categories or [c.name for c in CATEGORIES])
    edges = bin_edges()
    cols = ["category", "phase", "bin_left", "bin_right", "count"]
    if not events:
        return pd.DataFrame(columns=cols)
    steps = int(round(horizon / step))
    changes = {k: {c: one_minute_changes(f, c, steps, flavor) for c in cats} for k, f in frames.items()}
    scale = {}
    for s in sorted({k[0] for k in frames}):
        for c in cats:
            pooled = np.concatenate([changes[k][c] for k in changes if k[0] == s])
            sd = np.nanstd(pooled)
            scale[(s, c)] = sd if sd > 0 else 1.0
    out = []
    for c in cats:
        for phase in PHASES:
            vals = []
            for ev in events:
                f = frames[ev.key]
                t = f["t_end"].to_numpy()
                lo, hi = ev.phase_windows()[phase]
                m = (t > lo + 1e-9) & (t <= hi + 1e-9)
                vals.append(changes[ev.key][c][m] / scale[(ev.stock, c)])
            counts = _binned(np.concatenate(vals), edges)
            out.append(pd.DataFrame({"category": c, "phase": phase, "bin_left": edges[:-1],
                                     "bin_right": edges[1:], "count": counts}))
    return pd.concat(out, ignore_index=True)


def pressure_histogram(pressure: pd.DataFrame, events: Sequence[EpmEvent] = (),
                       n_bins: int = 60) -> pd.DataFrame:
    """Unconditional and in-event histograms of normalized selling pressure on
    shared bins spanning the pooled 0.1 to 99.9 percentiles."""
    sp = pressure["sp"].to_numpy(dtype=float)
    ok = np.isfinite(sp)
    if not ok.any():
        return pd.DataFrame(columns=["sample", "bin_left", "bin_right", "count"])
    lo, hi = np.quantile(sp[ok], [0.001, 0.999])
    if hi <= lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, n_bins + 1)
    in_event = np.zeros(len(pressure), dtype=bool)
    minute_end = 60.0 * pressure["minute"].to_numpy()
    stock = pressure["stock"].astype(str).to_numpy()
    date = pressure["date"].astype(str).to_numpy()
    for ev in events:
        in_event |= (stock == ev.stock) & (date == ev.date) & \
                    (minute_end > ev.t_start) & (minute_end - 60.0 < ev.t_trough)
    frames = []
    for name, mask in (("all", ok), ("drift_burst", ok & in_event)):
        frames.append(pd.DataFrame({"sample": name, "bin_left": edges[:-1], "bin_right": edges[1:],
                                    "count": _binned(sp[mask], edges)}))
    return pd.concat(frames, ignore_index=True)


# ------------------------------------------------------------------ tables

def regression_long(results: dict[str, RegressionResult], model: str, pool: str) -> pd.DataFrame:
    rows = []
    for eq, res in results.items():
        p = res.pvalue
        for j, name in enumerate(res.names):
            rows.append({"model": model, "pool": pool, "equation": eq, "variable": name,
                         "coef": res.coef[j], "t": res.tstat[j], "p": p[j], "stars": stars(p[j])})
        rows.append({"model": model, "pool": pool, "equation": eq, "variable": "adj_r2",
                     "coef": res.adj_r2, "t": np.nan, "p": np.nan, "stars": ""})
        rows.append({"model": model, "pool": pool, "equation": eq, "variable": "n_obs",
                     "coef": float(res.n_obs), "t": np.nan, "p": np.nan, "stars": ""})
    return pd.DataFrame(rows, columns=["model", "pool", "equation", "variable", "coef", "t", "p", "stars"])


def regression_table(results: dict[str, RegressionResult], variables: Sequence[str],
                     digits: int = 3) -> pd.DataFrame:
    """Publication layout: a coefficient row with stars and a parenthesised t row per
    variable, then adjusted R-squared and nObs; one column per equation."""
    eqs = list(results)
    rows = []
    for v in variables:
        coef_row, t_row = {"row": v}, {"row": ""}
        for eq in eqs:
            c, t = results[eq].get(v)
            if np.isfinite(c):
                i = results[eq].names.index(v)
                coef_row[eq] = f"{c:.{digits}f}{stars(results[eq].pvalue[i])}"
                t_row[eq] = f"({t:.2f})"
            else:
                coef_row[eq] = ""
                t_row[eq] = ""
        rows += [coef_row, t_row]
    rows.append({"row": "adj_r2", **{eq: f"{results[eq].adj_r2:.3f}" for eq in eqs}})
    rows.append({"row": "n_obs", **{eq: str(results[eq].n_obs) for eq in eqs}})
    return pd.DataFrame(rows, columns=["row", *eqs])


def write_csv(df: pd.DataFrame, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, lineterminator="\n", float_format="%.10g")
    return path


def write_manifest(paths: Sequence[Path], out_dir: str | Path) -> Path:
    """``manifest.json`` listing every artifact with its size and sha256."""
    out_dir = Path(out_dir)
    entries = []
    for p in sorted(Path(x) for x in paths):
        data = p.read_bytes()
        entries.append({"file": p.relative_to(out_dir).as_posix() if p.is_relative_to(out_dir) else p.name,
                        "bytes": len(data), "sha256": hashlib.sha256(data).hexdigest()})
    target = out_dir / "manifest.json"
    target.write_text(json.dumps({"artifacts": entries}, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return target
