"""Command-line entry point: ``sonarpoint {syseval,simulate,track,fitts,multi}``.

Exit codes: 0 on success, 2 for configuration errors, 3 when a module
contract is violated.  Every output file records the schema version, seed and
configuration hash; the same command and seed reproduce the same bytes.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .agent import AGENT_DEFAULTS, AgentParams, run_study1, run_study2
from .errors import ConfigurationError, ContractViolation
from .fitts import PUBLISHED_MODELS, summarize
from .report import Provenance, bar_chart, line_chart, write_csv, write_json
from .signals import SonarConfig, read_wav, write_wav
from .simulate import (
    CLEAN_SNR_DB, DEFAULT_NOISE, DEFAULT_RANGES, DEFAULT_SPEEDS, FINGER_GAIN, WALKER_SNR_DB,
    evaluate_stage_trial, linear_stage_protocol, scene_from_dict, scene_to_dict, synthesize_echo,
)
from .tracking import LevdState, OneEuroState, Tracker
from .triggers import DEFAULT_PINCH_THRESHOLD, METHODS, OFFSETS_MS, offset_sweep

EXIT_OK, EXIT_CONFIG, EXIT_CONTRACT = 0, 2, 3


# -- configuration ------------------------------------------------------------------

def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigurationError(f"config {path} must hold a JSON object")
    return doc


def resolve(defaults: dict, given: dict, what: str) -> dict:
    unknown = set(given) - set(defaults)
    if unknown:
        raise ConfigurationError(f"unknown {what} config keys: {sorted(unknown)}")
    out = dict(defaults)
    out.update(given)
    return out


def _int(v, name, lo=0):
    if isinstance(v, bool) or not isinstance(v, int) or v < lo:
        raise ConfigurationError(f"{name} must be an integer >= {lo}")
    return v


def _out_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigurationError(f"cannot create output directory {out}: {exc.strerror}") from exc
    return out


def _map(fn, jobs, threads: int):
    if threads <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * threads))))


def _log(msg: str):
    print(msg, file=sys.stderr)


def _mean_sd(v):
    v = np.asarray(v, dtype=np.float64)
    if len(v) == 0:
        return math.nan, math.nan
    return float(v.mean()), float(v.std(ddof=1)) if len(v) > 1 else 0.0


# -- syseval ----------------------------------------------------------------------------

SYSEVAL_DEFAULTS = {
    "ranges_mm": [list(b) for b in DEFAULT_RANGES],
    "speeds_mm_s": list(DEFAULT_SPEEDS),
    "noise": list(DEFAULT_NOISE),
    "reps": 10,
    "finger_gain": FINGER_GAIN,
    "clean_snr_db": CLEAN_SNR_DB,
    "walker_snr_db": WALKER_SNR_DB,
}


def _stage_job(trial):
    r = evaluate_stage_trial(trial)
    return r.measured, r.error, r.max_frame_seconds


def distance_checks(cells: list[dict]) -> dict:
    """Shape of the error-vs-distance curve, over per-cell mean errors."""
    near = [c for c in cells if c["range_hi_mm"] <= 100.0]
    far = [c for c in cells if c["range_lo_mm"] >= 100.0]
    out = {}
    if near and far:
        worst_near = max(c["mean_error_mm"] for c in near)
        out["far_exceeds_every_near_cell"] = all(c["mean_error_mm"] > worst_near for c in far)
    bands = {}
    for c in cells:
        bands.setdefault((c["range_lo_mm"], c["range_hi_mm"]), []).append(c["mean_error_mm"])
    means = {k: float(np.mean(v)) for k, v in bands.items()}
    if (0.0, 50.0) in means and (50.0, 100.0) in means:
        a, b = means[(0.0, 50.0)], means[(50.0, 100.0)]
        out["near_band_relative_difference"] = abs(a - b) / max(a, b)
    out["band_mean_error_mm"] = {f"{lo:g}-{hi:g}": v for (lo, hi), v in sorted(means.items())}
    clean = [c["mean_error_mm"] for c in near if c["noise"] == "none"]
    walker = [c["mean_error_mm"] for c in near if c["noise"] == "walker"]
    if clean:
        out["near_clean_max_mm"] = max(clean)
    if walker:
        out["near_walker_max_mm"] = max(walker)
    return out


def cmd_syseval(args) -> int:
    cfg = resolve(SYSEVAL_DEFAULTS, load_config(args.config), "syseval")
    seed = 0 if args.seed is None else args.seed
    try:
        trials = linear_stage_protocol(
            ranges=[tuple(b) for b in cfg["ranges_mm"]], speeds=cfg["speeds_mm_s"], noise=cfg["noise"],
            reps=_int(cfg["reps"], "reps", 1), seed=seed, finger_gain=float(cfg["finger_gain"]),
            clean_snr_db=float(cfg["clean_snr_db"]), walker_snr_db=float(cfg["walker_snr_db"]))
    except (TypeError, ValueError, IndexError) as exc:
        if isinstance(exc, (ConfigurationError, ContractViolation)):
            raise
        raise ConfigurationError(f"malformed syseval config: {exc}") from exc
    out = _out_dir(args.out)
    prov = Provenance("syseval", seed, cfg)
    t0 = time.perf_counter()
    results = _map(_stage_job, trials, args.threads)
    elapsed = time.perf_counter() - t0
    rows = []
    cells: dict[tuple, list[float]] = {}
    for i, (tr, (measured, err, _)) in enumerate(zip(trials, results)):
        lo, hi = tr.range_band
        rows.append((i, lo, hi, tr.speed, tr.noise, tr.rep, tr.movement, measured, err))
        cells.setdefault((lo, hi, tr.speed, tr.noise), []).append(err)
    write_csv(out / "syseval_trials.csv",
              ("trial", "range_lo_mm", "range_hi_mm", "speed_mm_s", "noise", "rep", "truth_mm",
               "measured_mm", "error_mm"), rows, prov)
    cell_rows = []
    cell_dicts = []
    for (lo, hi, speed, noise), errs in cells.items():
        m, sd = _mean_sd(errs)
        cell_rows.append((lo, hi, speed, noise, len(errs), m, sd))
        cell_dicts.append({"range_lo_mm": lo, "range_hi_mm": hi, "speed_mm_s": speed, "noise": noise,
                           "n": len(errs), "mean_error_mm": m, "sd_error_mm": sd})
    write_csv(out / "syseval_cells.csv",
              ("range_lo_mm", "range_hi_mm", "speed_mm_s", "noise", "n", "mean_error_mm", "sd_error_mm"),
              cell_rows, prov)
    write_json(out / "syseval_summary.json",
               {"n_trials": len(rows), "cells": cell_dicts, "checks": distance_checks(cell_dicts)}, prov)
    if args.plot:
        series = {}
        for noise in cfg["noise"]:
            for speed in cfg["speeds_mm_s"]:
                sel = [c for c in cell_dicts if c["noise"] == noise and c["speed_mm_s"] == float(speed)]
                series[f"{noise} {float(speed) / 10:g} cm/s"] = (
                    [0.5 * (c["range_lo_mm"] + c["range_hi_mm"]) / 10 for c in sel],
                    [c["mean_error_mm"] for c in sel], [c["sd_error_mm"] for c in sel])
        line_chart(out / "syseval_error.svg", "Displacement error per 5 cm movement", "range (cm)",
                   "mean abs error (mm)", series)
    worst = max(r[2] for r in results) * 1000 if results else 0.0
    _log(f"syseval: {len(rows)} trials in {elapsed:.1f} s, slowest frame {worst:.2f} ms -> {out}")
    return EXIT_OK


# -- simulate ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    if args.config is None:
        raise ConfigurationError("simulate needs a scene file (--config scene.json)")
    doc = load_config(args.config)
    scene, duration = scene_from_dict(doc)
    if args.seed is not None:
        scene = dataclasses.replace(scene, seed=args.seed)
    config = SonarConfig()
    rec = synthesize_echo(scene, config, duration)
    resolved = scene_to_dict(scene, duration)
    out = _out_dir(args.out)
    prov = Provenance("simulate", scene.seed, resolved)
    write_wav(out / "audio.wav", rec.audio, config.sample_rate)
    write_csv(out / "truth.csv", ("time_s", "range_mm", "displacement_mm"),
              zip(rec.truth_time.tolist(), rec.truth_range.tolist(), rec.truth_displacement.tolist()), prov)
    write_json(out / "scene.json", {"scene": resolved, "sample_rate": config.sample_rate,
                                    "n_samples": len(rec.audio)}, prov)
    if args.plot:
        line_chart(out / "truth.svg", "Finger range", "time (s)", "range (mm)",
                   {"truth": (rec.truth_time.tolist(), rec.truth_range.tolist(), None)})
    _log(f"simulate: {len(rec.audio) / config.sample_rate:.2f} s of audio -> {out}")
    return EXIT_OK


# -- track --------------------------------------------------------------------------------

TRACK_DEFAULTS = {"pp_threshold": 0.05, "max_hold_s": 2.0, "min_cutoff_hz": 1.0, "beta": 0.01,
                  "d_cutoff_hz": 1.0, "origin_mm": 0.0}


def cmd_track(args) -> int:
    cfg = resolve(TRACK_DEFAULTS, load_config(args.config), "track")
    seed = 0 if args.seed is None else args.seed
    samples, rate = read_wav(args.input)
    config = SonarConfig()
    try:
        levd = LevdState(pp_threshold=float(cfg["pp_threshold"]), max_hold=float(cfg["max_hold_s"]))
        filt = OneEuroState(float(cfg["min_cutoff_hz"]), float(cfg["beta"]), float(cfg["d_cutoff_hz"]))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ContractViolation):
            raise ConfigurationError(str(exc)) from exc
        raise ConfigurationError(f"malformed track config: {exc}") from exc
    tracker = Tracker(config, levd, filt, origin=float(cfg["origin_mm"]))
    states = tracker.track(samples)
    out = _out_dir(args.out)
    prov = Provenance("track", seed, dict(cfg, input=Path(args.input).name))
    write_csv(out / "track.csv", ("time_s", "raw_disp_mm", "cursor_mm", "quality"),
              [(s.time, s.raw_displacement, s.position, s.quality) for s in states], prov)
    if args.plot:
        line_chart(out / "track.svg", "Tracked cursor", "time (s)", "mm",
                   {"raw": ([s.time for s in states], [s.raw_displacement for s in states], None),
                    "cursor": ([s.time for s in states], [s.position for s in states], None)},
                   ylim=_span([s.raw_displacement for s in states] + [s.position for s in states]))
    _log(f"track: {len(states)} frames -> {out}")
    return EXIT_OK


def _span(vals):
    lo, hi = (min(vals), max(vals)) if vals else (0.0, 1.0)
    pad = 0.05 * (hi - lo) or 1.0
    return lo - pad, hi + pad


# -- fitts / multi -------------------------------------------------------------------------

FITTS_DEFAULTS = {
    "study": 1,
    "methods": None,  # study 1: all three; study 2: double_crossing and dwell
    "haptics": None,  # study 1: [false]; study 2: [false, true]
    "seeds": None,  # default: [--seed]
    "pipeline": "bypass",
    "blocks": None,
    "agent": {},
    "offset_ms": 0,
    "include_practice": False,
    "offsets_ms": list(OFFSETS_MS),
}


def agent_params(overrides: dict) -> dict:
    """Frozen per-method agent settings with optional per-method overrides."""
    if not isinstance(overrides, dict):
        raise ConfigurationError("agent overrides must map method -> {param: value}")
    out = {}
    names = {f.name for f in dataclasses.fields(AgentParams)}
    for m in METHODS:
        ov = overrides.get(m, {})
        bad = set(ov) - names
        if bad:
            raise ConfigurationError(f"unknown agent parameters for {m}: {sorted(bad)}")
        out[m] = dataclasses.replace(AGENT_DEFAULTS[m], **ov)
    unknown = set(overrides) - set(METHODS)
    if unknown:
        raise ConfigurationError(f"agent overrides for unknown methods: {sorted(unknown)}")
    return out


def _resolve_fitts(cfg: dict, seed: int) -> dict:
    study = cfg["study"]
    if study not in (1, 2):
        raise ConfigurationError("study must be 1 or 2")
    if cfg["methods"] is None:
        cfg["methods"] = list(METHODS) if study == 1 else ["double_crossing", "dwell"]
    if cfg["haptics"] is None:
        cfg["haptics"] = [False] if study == 1 else [False, True]
    if cfg["seeds"] is None:
        cfg["seeds"] = [seed]
    for m in cfg["methods"]:
        if m not in METHODS:
            raise ConfigurationError(f"unknown method {m!r}")
    if not cfg["methods"] or not cfg["seeds"] or not cfg["haptics"]:
        raise ConfigurationError("methods, seeds and haptics must be non-empty")
    if any(not isinstance(h, bool) for h in cfg["haptics"]):
        raise ConfigurationError("haptics entries must be true/false")
    for s in cfg["seeds"]:
        _int(s, "seed")
    if cfg["pipeline"] not in ("bypass", "sonar"):
        raise ConfigurationError("pipeline must be 'bypass' or 'sonar'")
    if cfg["blocks"] is not None:
        _int(cfg["blocks"], "blocks", 1)
    if cfg["offset_ms"] not in OFFSETS_MS:
        raise ConfigurationError(f"offset_ms must be one of {list(OFFSETS_MS)}")
    agent_params(cfg["agent"])
    return cfg


def _fitts_job(job):
    study, method, haptic, seed, pipeline, blocks, params, offset_ms = job
    if study == 1:
        runs = run_study1(method, seed, pipeline, params, offset_ms, blocks)
    else:
        runs = run_study2(method, haptic, seed, pipeline, params, blocks)
    return [(r.record, r.events, r.pinch_samples) for r in runs]


def run_fitts_batch(cfg: dict, threads: int = 1):
    """All (seed, method, haptic) sessions of a resolved fitts config, in a fixed order."""
    params = agent_params(cfg["agent"])
    jobs = []
    for seed in cfg["seeds"]:
        for method in cfg["methods"]:
            for haptic in cfg["haptics"]:
                if cfg["study"] == 1 and haptic:
                    raise ConfigurationError("the binary task has no haptic condition")
                jobs.append((cfg["study"], method, haptic, seed, cfg["pipeline"], cfg["blocks"], params[method],
                             cfg["offset_ms"]))
    return jobs, _map(_fitts_job, jobs, threads)


SELECTION_COLUMNS = ("seed", "method", "haptic", "block", "practice", "trial", "kind", "W_mm", "A_mm",
                     "index", "target_id", "selected_id", "endpoint_mm", "t_start_s", "t_select_s", "error",
                     "re_entries", "missing")
EVENT_COLUMNS = ("time_s", "method", "kind", "target_id", "coordinate_mm", "haptic_ms", "haptic_intensity",
                 "seed", "trial")
CELL_COLUMNS = ("method", "haptic", "W_mm", "A_mm", "n", "id_e_bits", "w_e_mm", "a_e_mm", "mt_s", "tp_bps",
                "er_pct", "tre", "degenerate", "best")
SWEEP_COLUMNS = ("offset_ms", "error_rate", "corrected_rate", "introduced_rate", "premature_rate", "net_gain",
                 "crossover")


def _collect(jobs, results):
    records, sel_rows, ev_rows, pinch = [], [], [], []
    for job, runs in zip(jobs, results):
        seed = job[3]
        for trial, (rec, events, samples) in enumerate(runs):
            records.append(rec)
            pinch.extend(samples)
            for i, s in enumerate(rec.selections):
                sel_rows.append((seed, rec.method, rec.haptic, rec.block, rec.practice, trial, rec.task.kind,
                                 rec.task.W, rec.task.A, i, s.target_id, s.selected_id, s.endpoint, s.t_start,
                                 s.t_select, s.error, s.re_entries, rec.missing))
            for e in events:
                ms, level = e.haptic if e.haptic is not None else (None, None)
                ev_rows.append((e.time, e.method, e.kind, e.target_id, e.coordinate, ms, level, seed, trial))
    return records, sel_rows, ev_rows, pinch


def _sweep_rows(pinch, offsets):
    rows, crossover = offset_sweep(pinch, offsets)
    best = max(rows, key=lambda r: (r.net_gain, -r.offset_ms))
    table = [(r.offset_ms, r.error_rate, r.corrected_rate, r.introduced_rate, r.premature_rate, r.net_gain,
              crossover is not None and r.offset_ms >= crossover) for r in rows]
    info = {"rows": [dataclasses.asdict(r) for r in rows], "crossover_ms": crossover,
            "best_offset_ms": best.offset_ms, "n_selections": len(pinch)}
    return table, info


def _summary_payload(summaries):
    out = []
    for s in summaries:
        d = s.to_dict()
        pub = PUBLISHED_MODELS.get(s.method)
        if pub is not None and s.model is not None:
            d["published_model"] = {"a": pub.a, "b": pub.b, "r2": pub.r2}
        out.append(d)
    return out


def _plots(out: Path, prefix: str, summaries):
    labels = [f"{s.method}{' +h' if s.haptic else ''}" for s in summaries]
    bar_chart(out / f"{prefix}_tp.svg", "Throughput", "TP (bits/s)", labels, [s.TP for s in summaries])
    bar_chart(out / f"{prefix}_mt.svg", "Movement time", "MT (s)", labels, [s.MT for s in summaries])
    bar_chart(out / f"{prefix}_er.svg", "Error rate", "ER (%)", labels, [s.ER for s in summaries])
    series, lines = {}, {}
    for lab, s in zip(labels, summaries):
        cells = [c for c in s.cells if math.isfinite(c.id_e)]
        series[lab] = ([c.id_e for c in cells], [c.mt for c in cells], None)
        if s.model is not None:
            lines[lab] = (s.model.b, s.model.a)
    line_chart(out / f"{prefix}_regression.svg", "MT against effective ID", "ID_e (bits)", "MT (s)",
               series, lines)


def cmd_fitts(args) -> int:
    seed = 0 if args.seed is None else args.seed
    cfg = _resolve_fitts(resolve(FITTS_DEFAULTS, load_config(args.config), "fitts"), seed)
    out = _out_dir(args.out)
    prov = Provenance("fitts", seed, cfg)
    t0 = time.perf_counter()
    jobs, results = run_fitts_batch(cfg, args.threads)
    records, sel_rows, ev_rows, pinch = _collect(jobs, results)
    summaries = summarize(records, cfg["include_practice"])
    write_csv(out / "fitts_selections.csv", SELECTION_COLUMNS, sel_rows, prov)
    write_csv(out / "fitts_events.csv", EVENT_COLUMNS, ev_rows, prov)
    write_csv(out / "fitts_cells.csv", CELL_COLUMNS,
              [(s.method, s.haptic, c.W, c.A, c.n, c.id_e, c.w_e, c.a_e, c.mt, c.tp, c.er, c.tre, c.degenerate,
                s.best_cell == (c.W, c.A)) for s in summaries for c in s.cells], prov)
    payload = {"summaries": _summary_payload(summaries),
               "notes": {"TP": "mean of per-(W,A) throughputs; TP_pooled averages ID_e/MT over selections",
                         "MT": "select-to-select interval; the first selection of each trial is excluded"}}
    if pinch and cfg["offset_ms"] == 0:
        table, info = _sweep_rows(pinch, cfg["offsets_ms"])
        write_csv(out / "offset_sweep.csv", SWEEP_COLUMNS, table, prov)
        payload["offset_sweep"] = info
    write_json(out / "fitts_summary.json", payload, prov)
    if args.plot:
        _plots(out, "fitts", summaries)
    _log(f"fitts: {len(records)} trials in {time.perf_counter() - t0:.1f} s -> {out}")
    return EXIT_OK


MULTI_DEFAULTS = {
    "n_seeds": 5,
    "pipeline": "bypass",
    "blocks": None,
    "agent": {},
    "offsets_ms": list(OFFSETS_MS),
}


def ordering_checks(s1: dict, s2: dict) -> dict:
    """Qualitative orderings expected from the two studies, for one seed."""
    dc, dw, pi = (s1.get(m) for m in METHODS)
    out = {}
    if dc and dw and pi:
        out["tp_dc_gt_dwell_gt_pinch"] = dc["TP"] > dw["TP"] > pi["TP"]
        out["er_pinch_gt_dc"] = pi["ER"] > dc["ER"]
    if "double_crossing" in s2 and "dwell" in s2:
        out["study2_er_dc_gt_dwell"] = s2["double_crossing"]["ER"] > s2["dwell"]["ER"]
    return out


def cmd_multi(args) -> int:
    seed = 0 if args.seed is None else args.seed
    cfg = resolve(MULTI_DEFAULTS, load_config(args.config), "multi")
    n = _int(cfg["n_seeds"], "n_seeds", 1)
    if cfg["blocks"] is not None and _int(cfg["blocks"], "blocks", 1) < 2:
        raise ConfigurationError("multi needs at least 2 blocks (the first Study 1 block is practice)")
    seeds = list(range(seed, seed + n))
    base = {"pipeline": cfg["pipeline"], "blocks": cfg["blocks"], "agent": cfg["agent"], "seeds": seeds,
            "offsets_ms": cfg["offsets_ms"]}
    c1 = _resolve_fitts(resolve(FITTS_DEFAULTS, dict(base, study=1), "fitts"), seed)
    c2 = _resolve_fitts(resolve(FITTS_DEFAULTS, dict(base, study=2), "fitts"), seed)
    out = _out_dir(args.out)
    prov = Provenance("multi", seed, cfg)
    t0 = time.perf_counter()
    j1, r1 = run_fitts_batch(c1, args.threads)
    j2, r2 = run_fitts_batch(c2, args.threads)
    rows, per_seed, all_pinch = [], [], []
    for s in seeds:
        idx1 = [i for i, j in enumerate(j1) if j[3] == s]
        idx2 = [i for i, j in enumerate(j2) if j[3] == s]
        rec1, _, _, pinch = _collect([j1[i] for i in idx1], [r1[i] for i in idx1])
        rec2, _, _, _ = _collect([j2[i] for i in idx2], [r2[i] for i in idx2])
        all_pinch.extend(pinch)
        sums1 = summarize(rec1)
        sums2 = summarize(rec2)
        for study, sums in ((1, sums1), (2, sums2)):
            for x in sums:
                rows.append((s, study, x.method, x.haptic, x.n, x.TP, x.TP_pooled, x.MT, x.ER, x.TRE))
        # Study 2 orderings compare triggers with haptic conditions pooled
        s2 = {}
        for m in ("double_crossing", "dwell"):
            recs = [r for r in rec2 if r.method == m]
            if recs:
                s2[m] = summarize([dataclasses.replace(r, haptic=False) for r in recs])[0].to_dict()
        per_seed.append({"seed": s, "checks": ordering_checks({x.method: x.to_dict() for x in sums1}, s2)})
    write_csv(out / "multi_seeds.csv", ("seed", "study", "method", "haptic", "n", "TP", "TP_pooled", "MT_s",
                                        "ER_pct", "TRE"), rows, prov)
    names = sorted({k for p in per_seed for k in p["checks"]})
    payload = {"seeds": seeds, "per_seed": per_seed,
               "all_seeds": {k: all(p["checks"].get(k, False) for p in per_seed) for k in names}}
    if all_pinch:
        table, info = _sweep_rows(all_pinch, cfg["offsets_ms"])
        write_csv(out / "offset_sweep.csv", SWEEP_COLUMNS, table, prov)
        payload["offset_sweep"] = info
    write_json(out / "multi_summary.json", payload, prov)
    if args.plot:
        for study in (1, 2):
            sel = [r for r in rows if r[1] == study]
            keys = sorted({(r[2], r[3]) for r in sel}, key=lambda k: (METHODS.index(k[0]), k[1]))
            labels = [f"{m}{' +h' if h else ''}" for m, h in keys]
            for col, name, unit in ((5, "tp", "TP (bits/s)"), (8, "er", "ER (%)")):
                vals = [[r[col] for r in sel if (r[2], r[3]) == k] for k in keys]
                ms = [_mean_sd(v) for v in vals]
                bar_chart(out / f"multi_study{study}_{name}.svg", f"Study {study}: {unit} over seeds", unit,
                          labels, [m for m, _ in ms], [sd for _, sd in ms])
    _log(f"multi: {len(seeds)} seeds in {time.perf_counter() - t0:.1f} s -> {out}")
    return EXIT_OK


# -- entry point ------------------------------------------------------------------------------

COMMANDS = {"syseval": cmd_syseval, "simulate": cmd_simulate, "track": cmd_track, "fitts": cmd_fitts,
            "multi": cmd_multi}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sonarpoint", description="Sonar finger tracking and selection-trigger "
                                "evaluation on synthetic ground truth.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "syseval": "range x speed x noise stage sweep through the simulator and tracker",
        "simulate": "scene JSON -> microphone WAV and truth CSV",
        "track": "microphone WAV -> cursor track CSV",
        "fitts": "run one study with the scripted agent and report Fitts metrics",
        "multi": "both studies over several seeds, with ordering checks",
    }
    for name, text in helps.items():
        sp = sub.add_parser(name, help=text, description=text)
        if name == "track":
            sp.add_argument("input", help="mono 16-bit 48 kHz WAV file")
        sp.add_argument("--config", help="JSON configuration (scene file for simulate)")
        sp.add_argument("--out", default=".", help="output directory (default: current directory)")
        sp.add_argument("--seed", type=int, default=None, help="base random seed (default 0)")
        sp.add_argument("--plot", action="store_true", help="also write SVG plots")
        sp.add_argument("--threads", type=int, default=1, help="worker processes for batch work")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.threads < 1:
            raise ConfigurationError("--threads must be at least 1")
        if args.seed is not None and args.seed < 0:
            raise ConfigurationError("--seed must be non-negative")
        return COMMANDS[args.command](args)
    except ConfigurationError as exc:
        _log(f"sonarpoint {args.command}: configuration error: {exc}")
        return EXIT_CONFIG
    except ContractViolation as exc:
        _log(f"sonarpoint {args.command}: contract violation: {exc}")
        return EXIT_CONTRACT


if __name__ == "__main__":
    sys.exit(main())
