"""Config-driven runs: single simulations, snapshots, sweeps and post-run fits."""

from __future__ import annotations

import logging
import math
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .assembly import DiscreteOperators, build_operators
from .config import ConfigError, SimulationConfig
from .diagnostics import DiagnosticsError, fit_decay_rate, inextensibility_residual
from .dynamics import AccelerationError, solve_acceleration
from .fields import reconstruct, uniform_grid
from .forcing import bind_forcing
from .integrators import Trajectory, run_simulation
from .io import (ENERGY_COLUMNS, ensure_writable_dir, write_json, write_snapshot_csv, write_table,
                 write_trajectory_csv)
from .quadrature import build_context

log = logging.getLogger(__name__)

TRAJECTORY_FILE = "trajectory.csv"
SUMMARY_FILE = "summary.json"
CONFIG_ECHO_FILE = "config.resolved.json"
SNAPSHOT_DIR = "snapshots"
INDEX_FILE = "index.csv"
INDEX_COLUMNS = ("index", "parameter", "value", "status", "blowup_time", "t_reached",
                 "E_total_final", "max_identity_residual", "omega", "r2", "run_dir", "error")


def operators_for(cfg: SimulationConfig, cache_dir=None) -> DiscreteOperators:
    params = cfg.beam
    quad = build_context(length=params.L, **cfg.quadrature)
    return build_operators(params, cfg.n_modes, quad, cache_dir=cache_dir,
                           allow_undamped_inertia=cfg.allow_undamped_inertia)


def _decay_summary(traj: Trajectory, decay: dict | None) -> dict | None:
    if decay is None:
        return None
    try:
        fit = fit_decay_rate(traj.t, traj.E_total, (decay["t_start"], decay["t_end"]), decay["floor"])
    except DiagnosticsError as exc:
        return {"error": str(exc)}
    return {"omega": fit.omega, "M": fit.M, "r2": fit.r2, "n_points": fit.n_points,
            "t_start": fit.t_start, "t_end": fit.t_end}


def write_snapshots(ops: DiscreteOperators, traj: Trajectory, load, out_dir: Path,
                    every: int, grid_points: int) -> dict:
    """Field snapshots at every ``every``-th record (and the last); returns inextensibility stats."""
    if every <= 0:
        return {"count": 0}
    snap_dir = ensure_writable_dir(out_dir / SNAPSHOT_DIR)
    grid = uniform_grid(ops.params.L, grid_points)
    picks = sorted(set(range(0, traj.n_records, every)) | {traj.n_records - 1})
    worst_resid, worst_dev = 0.0, 0.0
    for k in picks:
        state = traj.state(k)
        try:
            accel = solve_acceleration(ops, state, traj.load[k])
        except AccelerationError:
            accel = None
        if accel is not None and not np.all(np.isfinite(accel)):
            accel = None
        snap = reconstruct(ops.basis, ops.quad, state, accel=accel, grid=grid)
        write_snapshot_csv(snap_dir / f"snapshot_{k:06d}.csv", snap)
        resid, dev = inextensibility_residual(ops.basis, ops.quad, state, grid)
        worst_resid, worst_dev = max(worst_resid, resid), max(worst_dev, dev)
    return {"count": len(picks), "max_inextensibility_residual": worst_resid,
            "max_inext_deviation": worst_dev}


def summarize(traj: Trajectory, wall_clock: float) -> dict:
    E = traj.E_total
    E0 = float(E[0])
    drift = float(np.max(np.abs(E - E0)) / E0) if E0 > 0 else None
    return {
        "status": "blow-up" if traj.blew_up else "completed",
        "scheme": traj.scheme,
        "dt": traj.dt,
        "n_records": traj.n_records,
        "t_reached": float(traj.t[-1]),
        "E0": E0,
        "final_energies": {name: float(traj.energies[name][-1]) for name in ENERGY_COLUMNS},
        "max_identity_residual": traj.identity.max_abs,
        "max_relative_energy_drift": drift,
        "blew_up": traj.blew_up,
        "blowup_time": traj.blowup_time,
        "blowup_reason": traj.blowup_reason,
        "wall_clock_seconds": wall_clock,
    }


def simulate(cfg: SimulationConfig, out_dir, cache_dir=None) -> dict:
    """Run one configured simulation and write its outputs into ``out_dir``.

    Files: trajectory.csv, summary.json, config.resolved.json and, when
    snapshots are requested, snapshots/snapshot_<record>.csv.
    """
    out_dir = ensure_writable_dir(out_dir)
    write_json(out_dir / CONFIG_ECHO_FILE, cfg.resolved)
    start = time.perf_counter()
    ops = operators_for(cfg, cache_dir)
    load = bind_forcing(cfg.forcing, ops.basis, ops.quad)
    run = cfg.run
    traj = run_simulation(ops, cfg.initial_state(), load, cfg.integrator, run["t_final"], run["record_every"])
    write_trajectory_csv(out_dir / TRAJECTORY_FILE, traj)
    snaps = write_snapshots(ops, traj, load, out_dir, run["snapshot_every"], run["grid_points"])
    summary = summarize(traj, time.perf_counter() - start)
    summary["n_modes"] = ops.n_modes
    summary["tensor_witness"] = {"S": ops.witness_S, "I": ops.witness_I}
    summary["snapshots"] = snaps
    summary["decay_fit"] = _decay_summary(traj, cfg.decay)
    write_json(out_dir / SUMMARY_FILE, summary)
    return summary


def sweep_values(cfg: SimulationConfig) -> list[float]:
    sw = cfg.sweep
    if sw is None:
        raise ConfigError("no [sweep] section", "sweep")
    if "values" in sw:
        return [float(v) for v in sw["values"]]
    rnd = sw["random"]
    rng = np.random.default_rng(cfg.seed)
    return [float(x) for x in rng.uniform(rnd["low"], rnd["high"], rnd["count"])]


def _sweep_one(job: tuple) -> dict:
    index, resolved, path, value, run_dir, cache_dir = job
    row = {"index": index, "parameter": path, "value": value, "run_dir": str(run_dir),
           "status": "error", "blowup_time": None, "t_reached": None, "E_total_final": None,
           "max_identity_residual": None, "omega": None, "r2": None, "error": ""}
    try:
        cfg = SimulationConfig(resolved).replace(path, value)
        summary = simulate(cfg, run_dir, cache_dir)
    except Exception as exc:  # recorded in the index; other runs continue
        row["error"] = f"{type(exc).__name__}: {exc}"
        log.debug("sweep run %d failed:\n%s", index, traceback.format_exc())
        return row
    row.update(status=summary["status"], blowup_time=summary["blowup_time"],
               t_reached=summary["t_reached"], E_total_final=summary["final_energies"]["E_total"],
               max_identity_residual=summary["max_identity_residual"])
    fit = summary.get("decay_fit") or {}
    row["omega"], row["r2"] = fit.get("omega"), fit.get("r2")
    return row


def sweep(cfg: SimulationConfig, out_dir, cache_dir=None, workers: int = 1) -> list[dict]:
    """One run directory per sweep value plus ``index.csv``, written after all runs settle."""
    values = sweep_values(cfg)
    path = cfg.sweep["parameter"]
    # fail fast on a bad path before spawning anything
    cfg.replace(path, values[0])
    out_dir = ensure_writable_dir(out_dir)
    write_json(out_dir / CONFIG_ECHO_FILE, cfg.resolved)
    jobs = [(i, cfg.resolved, path, v, out_dir / f"run_{i:03d}", cache_dir) for i, v in enumerate(values)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            rows = list(pool.map(_sweep_one, jobs))
    else:
        rows = [_sweep_one(job) for job in jobs]
    write_index(out_dir / INDEX_FILE, rows)
    return rows


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x) if math.isfinite(x) else ""
    return str(x)


def write_index(path, rows: list[dict]) -> Path:
    return write_table(path, INDEX_COLUMNS, ([_cell(r[c]) for c in INDEX_COLUMNS] for r in rows))

