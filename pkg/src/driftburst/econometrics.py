"""Least squares with fixed effects, cluster-robust covariances and the
regression designs built on top of the series frames."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd
from scipy import stats

from .data import CATEGORIES, NON_HFT, TraderCategory
from .detector import PHASES, EpmEvent

logger = logging.getLogger(__name__)

N_LAGS = 5


class RankError(ValueError):
    pass


@dataclass
class RegressionResult:
    names: list[str]
    coef: np.ndarray
    cov: np.ndarray
    resid: np.ndarray
    n_obs: int
    r2: float
    adj_r2: float
    dropped: list[str] = field(default_factory=list)
    n_clusters: tuple[int, ...] = ()
    X: np.ndarray | None = field(default=None, repr=False)

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.maximum(np.diag(self.cov), 0.0))

    @property
    def tstat(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.coef / self.se

    @property
    def pvalue(self) -> np.ndarray:
        return 2.0 * stats.norm.sf(np.abs(self.tstat))

    def get(self, name: str) -> tuple[float, float]:
        """``(coef, t)`` for a named column; NaN if it was dropped."""
        if name not in self.names:
            return math.nan, math.nan
        i = self.names.index(name)
        return float(self.coef[i]), float(self.tstat[i])

    def with_cov(self, cov: np.ndarray, n_clusters: tuple[int, ...] = ()) -> "RegressionResult":
        return RegressionResult(self.names, self.coef, cov, self.resid, self.n_obs, self.r2,
                                self.adj_r2, self.dropped, n_clusters, self.X)


def stars(p: float) -> str:
    if not np.isfinite(p):
        return ""
    return "***" if p < 0.01 else "**" if p < 0.05 else "*" if p < 0.1 else ""


def ols(X: np.ndarray, y: np.ndarray, names: Sequence[str] | None = None,
        tol: float = 1e-10) -> RegressionResult:
    """OLS with deterministic removal of collinear columns.

    A column is dropped when its component orthogonal to the earlier columns
    is negligible, so later columns go first. The covariance is the classical
    homoskedastic one; swap it with :func:`hc0_cov` or :func:`cluster_cov`.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, k = X.shape
    names = list(names) if names is not None else [f"x{j}" for j in range(k)]
    if len(names) != k:
        raise ValueError("one name per column")
    if n < k:
        raise RankError(f"{n} rows for {k} columns")
    norms = np.linalg.norm(X, axis=0)
    _, R = np.linalg.qr(X, mode="reduced") if k else (None, np.zeros((0, 0)))
    diag = np.abs(np.diag(R)) if k else np.zeros(0)
    keep = (norms > 0) & (diag > tol * np.maximum(norms, 1e-300))
    # after removing a column later pivots can change; re-check until stable
    while True:
        Xk = X[:, keep]
        if Xk.shape[1] == 0:
            break
        _, Rk = np.linalg.qr(Xk, mode="reduced")
        dk = np.abs(np.diag(Rk))
        bad = dk <= tol * np.linalg.norm(Xk, axis=0)
        if not bad.any():
            break
        keep[np.flatnonzero(keep)[np.flatnonzero(bad)[0]]] = False
    dropped = [nm for nm, kp in zip(names, keep) if not kp]
    if dropped:
        logger.warning("dropping collinear columns: %s", ", ".join(dropped))
    Xk = X[:, keep]
    kept = [nm for nm, kp in zip(names, keep) if kp]
    p = Xk.shape[1]
    if n < max(p, 1):
        raise RankError(f"{n} rows for {p} columns")
    if p == 0:
        raise RankError("no estimable columns: " + ", ".join(dropped))
    coef, *_ = np.linalg.lstsq(Xk, y, rcond=None)
    resid = y - Xk @ coef
    sse = float(resid @ resid)
    has_const = np.any(np.all(Xk == Xk[0:1, :], axis=0) & (Xk[0] != 0))
    centered = y - y.mean() if has_const else y
    sst = float(centered @ centered)
    r2 = 1.0 - sse / sst if sst > 0 else (1.0 if sse == 0 else math.nan)
    dof = n - p
    adj = 1.0 - (1.0 - r2) * (n - (1 if has_const else 0)) / dof if dof > 0 else math.nan
    sigma2 = sse / dof if dof > 0 else math.nan
    bread = np.linalg.pinv(Xk.T @ Xk)
    return RegressionResult(kept, coef, sigma2 * bread, resid, n, r2, adj, dropped, (), Xk)


def _bread(X: np.ndarray) -> np.ndarray:
    return np.linalg.pinv(X.T @ X)


def hc0_cov(result: RegressionResult) -> RegressionResult:
    X, e = result.X, result.resid
    B = _bread(X)
    meat = (X * e[:, None]).T @ (X * e[:, None])
    return result.with_cov(B @ meat @ B)


def _cluster_meat(X: np.ndarray, e: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, int]:
    _, inv = np.unique(labels, return_inverse=True)
    g = inv.max() + 1
    scores = np.zeros((g, X.shape[1]))
    np.add.at(scores, inv, X * e[:, None])
    return scores.T @ scores, g


def cluster_cov(result: RegressionResult, clusters_a, clusters_b=None) -> RegressionResult:
    """Two-way cluster-robust covariance ``V_A + V_B - V_AB`` without a
    small-sample factor; negative eigenvalues are floored at zero.

    With a single cluster in one dimension the other is used alone.
    """
    X, e = result.X, result.resid
    a = np.asarray(clusters_a).astype(str)
    B = _bread(X)
    if clusters_b is None:
        meat, ga = _cluster_meat(X, e, a)
        return result.with_cov(B @ meat @ B, (ga,))
    b = np.asarray(clusters_b).astype(str)
    na, nb = np.unique(a).size, np.unique(b).size
    if na == 1 and nb == 1:
        raise ValueError("both cluster dimensions have a single cluster")
    if nb == 1 or na == 1:
        warnings.warn("one cluster dimension has a single cluster; using one-way clustering",
                      RuntimeWarning, stacklevel=2)
        keep = a if nb == 1 else b
        meat, g = _cluster_meat(X, e, keep)
        return result.with_cov(B @ meat @ B, (g,))
    ab = np.char.add(np.char.add(a, "\x1f"), b)
    ma, ga = _cluster_meat(X, e, a)
    mb, gb = _cluster_meat(X, e, b)
    mab, _ = _cluster_meat(X, e, ab)
    V = B @ (ma + mb - mab) @ B
    V = 0.5 * (V + V.T)
    w, Q = np.linalg.eigh(V)
    if w.min() < 0:
        V = (Q * np.maximum(w, 0.0)) @ Q.T
    return result.with_cov(V, (ga, gb))


# ------------------------------------------------------------------ VAR designs

FLAVORS = {"TI": "TI", "DI": "DI", "SI": "SI", "PNL": "PNL"}
RESPONSES = [c.name for c in CATEGORIES] + ["NON_HFT"]
CONTROLS = ("ret", "log_volume", "spread_pct")


def _standardize(values: np.ndarray, groups: np.ndarray) -> np.ndarray:
    out = np.zeros_like(values, dtype=float)
    for g in np.unique(groups):
        m = groups == g
        v = values[m]
        sd = v.std(axis=0)
        sd = np.where(sd > 0, sd, 1.0)
        out[m] = (v - v.mean(axis=0)) / sd
    return out


@dataclass
class VarDesign:
    """Stacked design for one pool and flavor; ``responses`` holds one
    standardized column per equation."""

    X: np.ndarray
    names: list[str]
    responses: dict[str, np.ndarray]
    stock: np.ndarray
    date: np.ndarray


def phase_dummies(t_end: np.ndarray, events: Sequence[EpmEvent], whole: bool = False) -> np.ndarray:
    """Phase indicator columns (or a single whole-window column) per row."""
    t = np.asarray(t_end, dtype=float)
    if whole:
        D = np.zeros((t.size, 1))
        for ev in events:
            D[(t > ev.t_pre_event + 1e-9) & (t <= ev.t_end + 1e-9), 0] = 1.0
        return D
    D = np.zeros((t.size, len(PHASES)))
    for ev in events:
        for j, name in enumerate(PHASES):
            lo, hi = ev.phase_windows()[name]
            D[(t > lo + 1e-9) & (t <= hi + 1e-9) & (D.sum(axis=1) == 0), j] = 1.0
    return D


def build_var_design(frames: dict[tuple[str, str], pd.DataFrame], events: Sequence[EpmEvent],
                     flavor: str = "TI", n_lags: int = N_LAGS) -> VarDesign:
    """Stack the event days into one VAR design.

    Rows are every interval of each event day after the first ``n_lags``;
    lags never cross a day. Columns: intercept, stock indicators (first
    stock is the reference), phase dummies (one whole-window dummy for the
    P&L flavor), ``n_lags`` lags of each category, then the controls. The
    responses and all non-dummy regressors are z-scored per stock.
    """
    flavor = flavor.upper()
    if flavor not in FLAVORS:
        raise ValueError(f"unknown flavor {flavor!r}")
    whole = flavor == "PNL"
    by_day: dict[tuple[str, str], list[EpmEvent]] = {}
    for ev in events:
        by_day.setdefault(ev.key, []).append(ev)
    keys = sorted(by_day)
    if not keys:
        raise ValueError("no events in the pool")
    cat_names = [c.name for c in CATEGORIES]
    blocks, dummies, controls, stock_col, date_col = [], [], [], [], []
    lag_blocks = []
    for key in keys:
        f = frames[key]
        vals = f[[f"{flavor}_{c}" for c in cat_names]].to_numpy(dtype=float)
        n = len(f)
        if n <= n_lags:
            continue
        rows = slice(n_lags, n)
        blocks.append(vals[rows])
        lag_blocks.append(np.hstack([vals[n_lags - l:n - l] for l in range(1, n_lags + 1)]))
        dummies.append(phase_dummies(f["t_end"].to_numpy()[rows], by_day[key], whole))
        ctrl = np.column_stack([f["ret"].to_numpy(), np.log1p(f["volume"].to_numpy()),
                                f["spread_pct"].to_numpy()])
        controls.append(ctrl[rows])
        stock_col += [key[0]] * (n - n_lags)
        date_col += [key[1]] * (n - n_lags)
    stock = np.asarray(stock_col)
    date = np.asarray(date_col)
    Y = np.vstack(blocks)
    L = np.vstack(lag_blocks)
    Cc = np.vstack(controls)
    Cc = np.where(np.isfinite(Cc), Cc, 0.0)
    Ys = _standardize(Y, stock)
    Ls = _standardize(L, stock)
    Cs = _standardize(Cc, stock)
    # NON_HFT aggregate response from raw sums, standardized on its own
    nh = [cat_names.index(c.name) for c in CATEGORIES if c in NON_HFT]
    non_hft = _standardize(Y[:, nh].sum(axis=1, keepdims=True), stock)[:, 0]

    stocks = sorted(set(stock_col))
    fe = np.column_stack([(stock == s).astype(float) for s in stocks[1:]]) if len(stocks) > 1 \
        else np.zeros((stock.size, 0))
    D = np.vstack(dummies)
    d_names = ["event"] if whole else list(PHASES)
    lag_names = [f"{c}_lag{l}" for l in range(1, n_lags + 1) for c in cat_names]
    X = np.hstack([np.ones((stock.size, 1)), fe, D, Ls, Cs])
    names = ["const"] + [f"fe_{s}" for s in stocks[1:]] + d_names + lag_names + list(CONTROLS)
    responses = {c: Ys[:, j] for j, c in enumerate(cat_names)}
    responses["NON_HFT"] = non_hft
    return VarDesign(X, names, responses, stock, date)


def estimate_var(design: VarDesign, responses: Sequence[str] | None = None) -> dict[str, RegressionResult]:
    """One OLS per equation with stock-and-date clustered covariance."""
    out = {}
    for name in responses or RESPONSES:
        y = design.responses[name]
        if not np.any(np.abs(y) > 0):
            logger.warning("%s: response has no variation, equation skipped", name)
            continue
        res = ols(design.X, y, design.names)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            out[name] = cluster_cov(res, design.stock, design.date)
    return out


# ------------------------------------------------------------------ cross-section

CROSS_REGRESSORS = ("own_ei", "IB_HFT_OWN_ei", "IB_CLIENT_ei", "log_volume", "spread_pct", "ret")


def cross_section_rows(frames: dict[tuple[str, str], pd.DataFrame],
                       events: Sequence[EpmEvent]) -> pd.DataFrame:
    """Per event: TI sums over the late stage and over early plus intermediate,
    and controls over ``(t_start, start of late]``."""
    rows = []
    for ev in events:
        f = frames[ev.key]
        t = f["t_end"].to_numpy()
        s, _, late_start, trough = ev.stage_bounds
        ei = (t > s + 1e-9) & (t <= late_start + 1e-9)
        late = (t > late_start + 1e-9) & (t <= trough + 1e-9)
        rec = {"event": ev.event_id, "stock": ev.stock, "date": ev.date,
               "classification": ev.classification}
        for c in CATEGORIES:
            col = f[f"TI_{c.name}"].to_numpy()
            rec[f"{c.name}_late"] = float(col[late].sum())
            rec[f"{c.name}_ei"] = float(col[ei].sum())
        rec["log_volume"] = float(np.log1p(f["volume"].to_numpy()[ei].sum()))
        sp = f["spread_pct"].to_numpy()[ei]
        rec["spread_pct"] = float(np.nanmean(sp)) if np.isfinite(sp).any() else 0.0
        rec["ret"] = float(f["ret"].to_numpy()[ei].sum())
        rows.append(rec)
    return pd.DataFrame(rows)


def cross_sectional(rows: pd.DataFrame, category: TraderCategory) -> RegressionResult:
    """Late-stage TI of ``category`` on its own early-plus-intermediate TI, the
    same for IB_HFT_OWN and IB_CLIENT, and the controls; HC0 covariance."""
    if len(rows) < 10:
        warnings.warn(f"cross-sectional pool has only {len(rows)} events", RuntimeWarning, stacklevel=2)
    y = rows[f"{category.name}_late"].to_numpy(dtype=float)
    cols = [rows[f"{category.name}_ei"], rows["IB_HFT_OWN_ei"], rows["IB_CLIENT_ei"],
            rows["log_volume"], rows["spread_pct"], rows["ret"]]
    X = np.column_stack([np.ones(len(rows))] + [c.to_numpy(dtype=float) for c in cols])
    names = ["const", *CROSS_REGRESSORS]
    if category in (TraderCategory.IB_HFT_OWN, TraderCategory.IB_CLIENT):
        # own flow already in the list: keep the single column
        X = np.delete(X, 2 if category is TraderCategory.IB_HFT_OWN else 3, axis=1)
        names.pop(2 if category is TraderCategory.IB_HFT_OWN else 3)
    return hc0_cov(ols(X, y, names))


# ------------------------------------------------------------------ error correction

ECM_BASE = ("const", "dy_lag1", "y_lag1", "dp0", "dp1", "dp2", "dp3")


@dataclass(frozen=True)
class EcmInput:
    """One day and category: inventory ``y`` (millions, zero at the open),
    log midquote ``p`` and the drop and recovery indicators on the grid."""

    y: np.ndarray
    p: np.ndarray
    drop: np.ndarray
    recovery: np.ndarray

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, category: str, events: Sequence[EpmEvent]) -> "EcmInput":
        t = frame["t_end"].to_numpy()
        drop = np.zeros(t.size, dtype=bool)
        rec = np.zeros(t.size, dtype=bool)
        for ev in events:
            drop |= (t >= ev.t_start - 1e-9) & (t <= ev.t_trough + 1e-9)
            rec |= (t > ev.t_trough + 1e-9) & (t <= ev.t_end + 1e-9)
        if category == "NON_HFT":
            y = sum(frame[f"INV_{c.name}"].to_numpy() for c in CATEGORIES if c in NON_HFT)
        else:
            y = frame[f"INV_{category}"].to_numpy()
        p = frame["logmid"].to_numpy()
        return cls(np.asarray(y, float), p, drop, rec)


def ecm_design(inp: EcmInput) -> tuple[np.ndarray, np.ndarray, list[str]]:
    y = np.concatenate(([0.0], inp.y))  # inventory is zero at the open
    dy = np.diff(y)
    dp = np.diff(np.concatenate(([inp.p[0]], inp.p)))
    n = inp.y.size
    t = np.arange(4, n)  # need dp_{t-3} and dy_{t-1}
    base = np.column_stack([np.ones(t.size), dy[t - 1], y[t], dp[t], dp[t - 1], dp[t - 2], dp[t - 3]])
    # y[t] is the inventory at the end of interval t-1 in the padded array
    dd = inp.drop[t].astype(float)[:, None]
    du = inp.recovery[t].astype(float)[:, None]
    X = np.hstack([base, base * dd, base * du])
    names = list(ECM_BASE) + [f"{n}_D" for n in ECM_BASE] + [f"{n}_U" for n in ECM_BASE]
    return X, dy[t], names


def ecm_estimate(inp: EcmInput) -> RegressionResult | None:
    """Per-day error-correction regression with HC0 covariance; ``None`` when
    the inventory never moves."""
    X, yv, names = ecm_design(inp)
    if not np.any(yv != 0):
        logger.info("degenerate inventory: no changes")
        return None
    return hc0_cov(ols(X, yv, names))


@dataclass(frozen=True)
class EcmAverage:
    names: list[str]
    coef: np.ndarray
    tstat: np.ndarray
    n_days: np.ndarray

    @property
    def se(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.abs(self.coef / self.tstat)


def ecm_average(results: Sequence[RegressionResult | None]) -> EcmAverage:
    """Average coefficients across days; the t-statistic treats days as
    independent: ``mean / sqrt(sum of variances / N**2)``."""
    results = [r for r in results if r is not None]
    if not results:
        raise ValueError("no estimated days")
    names = list(ECM_BASE) + [f"{n}_D" for n in ECM_BASE] + [f"{n}_U" for n in ECM_BASE]
    coef = np.full(len(names), np.nan)
    tstat = np.full(len(names), np.nan)
    counts = np.zeros(len(names), dtype=int)
    for j, nm in enumerate(names):
        b = [r.coef[r.names.index(nm)] for r in results if nm in r.names]
        v = [r.cov[r.names.index(nm), r.names.index(nm)] for r in results if nm in r.names]
        if not b:
            continue
        n = len(b)
        coef[j] = np.mean(b)
        se = math.sqrt(sum(v)) / n
        tstat[j] = coef[j] / se if se > 0 else math.nan
        counts[j] = n
    return EcmAverage(names, coef, tstat, counts)
