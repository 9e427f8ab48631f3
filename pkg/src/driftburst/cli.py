"""Command-line entry point: ``driftburst {simulate,detect,measure,regress,report}``."""

from __future__ import annotations

import argparse
import logging
import shutil
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import detector as det
from . import econometrics as eco
from . import flows
from . import report as rep
from .config import load_config
from .data import CATEGORIES, DMM_CATEGORIES, SessionSpec, ingest_events
from .preprocess import transaction_series
from .simulator import scenario_from_config, simulate, write_simulation

logger = logging.getLogger("driftburst")


def _session(cfg) -> SessionSpec:
    return SessionSpec.from_config(cfg)


def cmd_simulate(args) -> int:
    scenario = scenario_from_config(load_config(args.scenario))
    paths = write_simulation(simulate(scenario), args.out)
    logger.info("wrote %d files to %s", len(paths), args.out)
    return 0


def cmd_detect(args) -> int:
    cfg = load_config(args.config)
    session = _session(cfg)
    spec = det.KernelSpec.from_config(cfg)
    if cfg.get("db.barrier") is not None:
        barrier = cfg.get_float("db.barrier", -4.9)
    else:
        barrier = det.critical_value(spec, session, cfg.get_float("db.confidence", 0.999),
                                     cfg.get_int("db.cv_paths", 5000), cfg.get_int("db.cv_seed", 0))
    logger.info("barrier %.4f", barrier)
    tapes = ingest_events(args.input, session)
    events = []
    for key in sorted(tapes):
        _, seg = det.detect_tape(tapes[key], barrier, spec, session,
                                 cfg.get_int("preaverage.window", 5),
                                 cfg.get_float("db.merge_gap_s", 60.0))
        events += seg.events
    events = det.classify_systematic(events, cfg.get_int("db.systematic_threshold", 10))
    det.write_event_list(events, args.out)
    logger.info("%d events", len(events))
    return 0


def _alt_panel(frames: dict) -> pd.DataFrame:
    returns = {k: f["ret"].to_numpy() for k, f in frames.items()}
    ret_flags = det.return_epm_detector(returns)
    out = []
    try:
        res_flags = det.residual_epm_detector(returns)
    except ValueError as exc:
        logger.warning("residual detector skipped: %s", exc)
        res_flags = None
    for k in sorted(frames):
        out.append(pd.DataFrame({
            "stock": k[0], "date": k[1], "interval": np.arange(returns[k].size),
            "ret": returns[k],
            "return_flag": ret_flags.flags[k].astype(int),
            "residual_flag": (res_flags.flags[k].astype(int) if res_flags is not None
                              else np.zeros(returns[k].size, dtype=int)),
        }))
    return pd.concat(out, ignore_index=True)


def cmd_measure(args) -> int:
    cfg = load_config(args.config)
    session = _session(cfg)
    step = cfg.get_float("grid.step_seconds", 10.0)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    events = det.read_event_list(args.events)
    shutil.copyfile(args.events, out / "events.csv")
    tapes = ingest_events(args.input, session)
    by_day: dict = {}
    for ev in events:
        by_day.setdefault(ev.key, []).append(ev)
    frames = {k: flows.series_frame(t, session, by_day.get(k, ()), step) for k, t in sorted(tapes.items())}

    rep.write_csv(pd.concat([frames[k] for k in sorted(by_day) if k in frames] or
                            [next(iter(frames.values())).iloc[:0]], ignore_index=True),
                  out / "series.csv")
    imb = [flows.long_imbalances(frames[ev.key], ev) for ev in events]
    rep.write_csv(pd.concat(imb, ignore_index=True) if imb else
                  pd.DataFrame(columns=["event", "interval", "t_end", "category", "TI", "DI", "SI"]),
                  out / "imbalance.csv")

    impact_rows = []
    for ev in events:
        series = transaction_series(tapes[ev.key])
        try:
            pi = flows.price_impact(ev, series)
        except flows.ImpactError as exc:
            logger.warning("%s", exc)
            continue
        impact_rows.append({"event": ev.event_id, "classification": ev.classification,
                            "tau_s": ev.tau, "PPI": pi.ppi, "DPI": pi.dpi, "TPI": pi.tpi})
    rep.write_csv(pd.DataFrame(impact_rows, columns=["event", "classification", "tau_s", "PPI", "DPI", "TPI"]),
                  out / "impact.csv")

    pnl_rows = []
    for ev in events:
        f = frames[ev.key]
        inside = (f["t_end"] > ev.t_pre_event + 1e-9) & (f["t_end"] <= ev.t_end + 1e-9)
        sub = f[inside]
        for c in CATEGORIES:
            pnl_rows.append(pd.DataFrame({"event": ev.event_id, "interval": sub["interval"].to_numpy(),
                                          "category": c.name, "pnl": sub[f"PNL_{c.name}"].to_numpy()}))
    rep.write_csv(pd.concat(pnl_rows, ignore_index=True) if pnl_rows else
                  pd.DataFrame(columns=["event", "interval", "category", "pnl"]), out / "pnl.csv")

    pressure = flows.pressure_table(tapes, session)
    rep.write_csv(pressure, out / "pressure.csv")
    tail = flows.extract_pressure_tail(pressure, events, cfg.get_float("sp.tail_fraction", 0.001))
    rep.write_csv(flows.tail_imbalance_changes(tail, tapes, session), out / "pressure_tail.csv")

    per_event = flows.event_descriptives(events, tapes, session)
    rep.write_csv(per_event, out / "descriptives.csv")
    rebates = flows.dmm_rebate_estimate(events, tapes)
    rep.write_csv(pd.DataFrame({"category": list(rebates), "avg_rebate": list(rebates.values())}),
                  out / "rebates.csv")
    rep.write_csv(_alt_panel(frames), out / "alt_flags.csv")
    return 0


def _load_frames(metrics: Path) -> dict:
    series = pd.read_csv(metrics / "series.csv", dtype={"stock": str, "date": str})
    return {(s, d): g.reset_index(drop=True) for (s, d), g in series.groupby(["stock", "date"], sort=True)}


def _pool(events, pool: str, min_duration: float):
    events = det.filter_min_duration(events, min_duration)
    if pool != "all":
        events = [e for e in events if e.classification == pool]
    return events


VAR_ROWS = list(det.PHASES) + list(eco.CONTROLS)


def cmd_regress(args) -> int:
    cfg = load_config(args.config)
    metrics = Path(args.metrics)
    frames = _load_frames(metrics)
    events = _pool(det.read_event_list(args.events), args.pool, cfg.get_float("db.min_duration_s", 100.0))
    events = [e for e in events if e.key in frames]
    if not events:
        logger.error("no events in pool %s", args.pool)
        return 1
    model = args.model
    if model in ("var", "var-aggr", "var-pass", "pnl"):
        flavor = {"var": "TI", "var-aggr": "DI", "var-pass": "SI", "pnl": "PNL"}[model]
        design = eco.build_var_design(frames, events, flavor)
        results = eco.estimate_var(design)
        rows = ["event"] + list(eco.CONTROLS) if flavor == "PNL" else VAR_ROWS
        table = rep.regression_table(results, rows)
    elif model == "cross":
        data = eco.cross_section_rows(frames, events)
        results = {c.name: eco.cross_sectional(data, c) for c in DMM_CATEGORIES}
        table = rep.regression_table(results, ["const", *eco.CROSS_REGRESSORS])
    elif model == "ecm":
        by_day: dict = {}
        for ev in events:
            by_day.setdefault(ev.key, []).append(ev)
        results = {}
        rows = []
        for name in [c.name for c in CATEGORIES] + ["NON_HFT"]:
            per_day = [eco.ecm_estimate(eco.EcmInput.from_frame(frames[k], name, evs))
                       for k, evs in sorted(by_day.items())]
            try:
                avg = eco.ecm_average(per_day)
            except ValueError:
                continue
            for j, var in enumerate(avg.names):
                rows.append({"equation": name, "variable": var, "coef": avg.coef[j],
                             "t": avg.tstat[j], "n_days": int(avg.n_days[j])})
        long = pd.DataFrame(rows, columns=["equation", "variable", "coef", "t", "n_days"])
        rep.write_csv(long, Path(args.out).with_name(Path(args.out).stem + "_long.csv"))
        wide = long.pivot(index="variable", columns="equation", values="coef").reset_index()
        rep.write_csv(wide, args.out)
        return 0
    else:
        raise SystemExit(f"unknown model {model}")
    rep.write_csv(table, args.out)
    rep.write_csv(rep.regression_long(results, model, args.pool),
                  Path(args.out).with_name(Path(args.out).stem + "_long.csv"))
    return 0


def cmd_report(args) -> int:
    metrics = Path(args.metrics)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    events = det.read_event_list(metrics / "events.csv")
    per_event = pd.read_csv(metrics / "descriptives.csv", dtype={"stock": str, "date": str})
    written.append(rep.write_csv(flows.descriptives_table(per_event), out / "table1_descriptives.csv"))

    alt = pd.read_csv(metrics / "alt_flags.csv", dtype={"stock": str, "date": str})
    alternatives = {"return": {}, "residual": {}}
    for (s, d), g in alt.groupby(["stock", "date"], sort=True):
        neg = g["ret"].to_numpy() < 0
        alternatives["return"][(s, d)] = (g["return_flag"].to_numpy() == 1) & neg
        alternatives["residual"][(s, d)] = (g["residual_flag"].to_numpy() == 1) & neg
    written.append(rep.write_csv(rep.overlap_table(events, alternatives), out / "tableA1_overlap.csv"))

    frames = _load_frames(metrics)
    curves, hists = [], []
    for pool in ("unsystematic", "systematic"):
        evs = [e for e in det.filter_min_duration(events) if e.classification == pool and e.key in frames]
        if not evs:
            continue
        mean_min = float(np.mean([e.tau for e in evs])) / 60.0
        curves.append(rep.curve_data(frames, evs, mean_min).assign(pool=pool))
        hists.append(rep.histogram_data(frames, evs).assign(pool=pool))
    if curves:
        written.append(rep.write_csv(pd.concat(curves, ignore_index=True), out / "curves.csv"))
        written.append(rep.write_csv(pd.concat(hists, ignore_index=True), out / "imbalance_histograms.csv"))
    pressure = pd.read_csv(metrics / "pressure.csv", dtype={"stock": str, "date": str})
    written.append(rep.write_csv(rep.pressure_histogram(pressure, events), out / "pressure_histogram.csv"))
    tail = metrics / "pressure_tail.csv"
    if tail.exists():
        t = pd.read_csv(tail, dtype={"stock": str, "date": str})
        written.append(rep.write_csv(t, out / "pressure_tail.csv"))
    if args.regress_dir:
        for p in sorted(Path(args.regress_dir).glob("*.csv")):
            target = out / "tables" / p.name
            target.parent.mkdir(parents=True, exist_ok=True)
            shutil.copyfile(p, target)
            written.append(target)
    rep.write_manifest(written, out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="driftburst", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a synthetic market")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("detect", help="detect drift-burst events")
    p.add_argument("--input", required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("measure", help="flow metrics for detected events")
    p.add_argument("--events", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--config")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("regress", help="estimate a model on measured events")
    p.add_argument("--metrics", required=True)
    p.add_argument("--events", required=True)
    p.add_argument("--model", required=True, choices=["var", "var-aggr", "var-pass", "pnl", "cross", "ecm"])
    p.add_argument("--pool", default="unsystematic", choices=["systematic", "unsystematic", "all"])
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_regress)

    p = sub.add_parser("report", help="assemble tables and plot-ready data")
    p.add_argument("--metrics", required=True)
    p.add_argument("--regress-dir")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_report)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
