"""Run drivers behind the command line: simulations and convergence studies."""
import csv
import os
import platform
import subprocess
import time
from dataclasses import replace

import numpy as np

from . import __version__, _accel
from .config import RunConfig, config_dict, serialize_config
from .diagnostics import (dissipation_terms, discrete_energy, estimate_eoc, field_error_norm,
                          max_phase, max_velocity, min_density, potential_energy, total_mass)
from .errors import NonconvergenceError
from .mesh import build_mesh
from .model import exact_steady_profile
from .output import TimeSeriesWriter, write_field_snapshot, write_manifest
from .scheme import TimeGrid, advance, initial_state
from .space import DgSpace


def _git_commit():
    here = os.path.dirname(os.path.abspath(__file__))
    try:
        out = subprocess.run(["git", "rev-parse", "HEAD"], cwd=here, capture_output=True,
                             text=True, timeout=5)
    except (OSError, subprocess.SubprocessError):
        return None
    return out.stdout.strip() or None if out.returncode == 0 else None


def time_grid(cfg, mesh):
    k = float(np.max(mesh.h)) ** 2 if cfg.timestep == "h2" else float(cfg.timestep)
    return TimeGrid.fixed_step(k, cfg.final_time)


def setup(cfg):
    mesh = build_mesh(cfg.mesh)
    space = DgSpace(mesh, cfg.degree)
    state = initial_state(space, cfg.params, cfg.initial, seed=cfg.seed,
                          amplitude=cfg.amplitude, pin_lambda=cfg.pin)
    return space, state


def level_row(params, state, previous=None, k=None, report=None, pin=None):
    E = discrete_energy(params, state, pin)
    row = {"step": state.step, "t": state.t, "energy": E, "mass": total_mass(params, state),
           "max_velocity": max_velocity(state), "potential": potential_energy(params, state, pin),
           "min_density": min_density(params, state), "max_phi": max_phase(state)}
    if previous is not None:
        terms = dissipation_terms(params, previous, state, pin)
        row.update(terms)
        row["deviation"] = (E - discrete_energy(params, previous, pin)
                            + k * sum(terms.values()))
    if report is not None:
        row["newton_iterations"] = report.iterations
        row["residual"] = report.residuals[-1]
    return row


def run_simulation(cfg, out_dir=None, log=print):
    """Run ``cfg``; write ``timeseries.csv``, snapshots and ``manifest.json``.

    Returns ``(status, rows)`` with status 0 on success and 2 when Newton
    fails (the rows written so far stay on disk).
    """
    out_dir = out_dir or cfg.output
    os.makedirs(out_dir, exist_ok=True)
    snap_dir = os.path.join(out_dir, "snapshots")
    os.makedirs(snap_dir, exist_ok=True)
    space, state = setup(cfg)
    grid = time_grid(cfg, space.mesh)
    ext = "dat" if space.dim == 1 else "vtk"
    manifest = {
        "version": __version__, "commit": _git_commit(), "backend": _accel.backend(),
        "python": platform.python_version(), "numpy": np.__version__,
        "config": config_dict(cfg), "config_text": serialize_config(cfg),
        "mesh": {"spec": cfg.mesh, "elements": space.mesh.n_elements,
                 "h_max": float(np.max(space.mesh.h))},
        "seed": cfg.seed, "steps_planned": grid.n_steps, "timestep": grid.k(0) if grid.n_steps else None,
        "gravity_convention": "momentum residual carries +rho g . Xi, physical acceleration is -g",
    }
    rows = []
    status, failure = 0, None
    t0 = time.perf_counter()

    def snap(st):
        write_field_snapshot(st, os.path.join(snap_dir, f"step_{st.step:06d}.{ext}"))

    with TimeSeriesWriter(os.path.join(out_dir, "timeseries.csv")) as ts:
        row = level_row(cfg.params, state, pin=cfg.pin)
        ts.write(row)
        rows.append(row)
        snap(state)
        last = [state]

        def hook(n, old, new, k, report):
            r = level_row(cfg.params, new, old, k, report, cfg.pin)
            ts.write(r)
            rows.append(r)
            last[0] = new
            every = cfg.snapshot_every
            if (every and new.step % every == 0) or n == grid.n_steps - 1:
                snap(new)
            if log:
                log(f"step {new.step:5d}  t={new.t:.6g}  E={r['energy']:.10g}  "
                    f"dev={r['deviation']:.2e}  newton={report.iterations}")

        try:
            advance(cfg.params, state, grid, cfg.newton, hooks=[hook], pin_lambda=cfg.pin,
                    keep=False)
        except NonconvergenceError as exc:
            status = 2
            failure = {"step": exc.step, "residual": exc.residual, "message": str(exc)}
            if log:
                log(f"nonconvergence at step {exc.step}: {exc}")
    manifest.update({"status": status, "failure": failure, "steps_taken": len(rows) - 1,
                     "seconds": time.perf_counter() - t0})
    write_manifest(os.path.join(out_dir, "manifest.json"), manifest)
    return status, rows


CONVERGENCE_COLUMNS = ("N", "e_phi", "eoc_phi", "e_v", "eoc_v", "e_lam", "eoc_lam")


def steady_errors(cfg, N, log=None):
    """``L_inf(0, T; L2)`` errors of phi, v and lam for the steady profile on
    ``interval(-1, 1, N)`` with ``k = h^2``."""
    P = cfg.params
    mesh = build_mesh(f"interval(-1,1,{N})")
    space = DgSpace(mesh, cfg.degree)
    state = initial_state(space, P, "steady-tanh", pin_lambda=cfg.pin)
    k = float(np.max(mesh.h)) ** 2
    grid = TimeGrid.fixed_step(k, cfg.final_time)
    exact = {
        "phi": lambda x, t: exact_steady_profile(P, x[..., 0]),
        "v": lambda x, t: np.zeros(x.shape[:-1]),
        "lam": lambda x, t: np.zeros(x.shape[:-1]),
    }
    err = {w: field_error_norm([state], f, w) for w, f in exact.items()}

    def hook(n, old, new, kk, report):
        for w, f in exact.items():
            err[w] = max(err[w], field_error_norm([new], f, w))

    advance(P, state, grid, cfg.newton, hooks=[hook], pin_lambda=cfg.pin, keep=False)
    if log:
        log(f"N={N:5d}  steps={grid.n_steps}  e_phi={err['phi']:.4e}  e_v={err['v']:.4e}  "
            f"e_lam={err['lam']:.4e}")
    return err


def run_convergence(cfg, levels, out_dir=None, log=print):
    """Steady-profile convergence table; writes ``convergence.csv``.

    Returns ``(status, rows)``; rows hold errors and EOCs (``None`` in the
    first row).
    """
    if cfg.initial != "steady-tanh":
        raise ValueError("convergence studies use the steady-tanh case")
    out_dir = out_dir or cfg.output
    os.makedirs(out_dir, exist_ok=True)
    cfg = replace(cfg, timestep="h2")
    rows = []
    status = 0
    try:
        for N in levels:
            e = steady_errors(cfg, N, log)
            rows.append({"N": N, "e_phi": e["phi"], "e_v": e["v"], "e_lam": e["lam"]})
    except NonconvergenceError as exc:
        status = 2
        if log:
            log(f"nonconvergence at N={N}, step {exc.step}: {exc}")
    for w in ("phi", "v", "lam"):
        if rows:
            rows[0][f"eoc_{w}"] = None
        pairs = [(r["N"], r[f"e_{w}"]) for r in rows]
        if len(pairs) > 1 and all(e > 0 for _, e in pairs):
            for r, eoc in zip(rows[1:], estimate_eoc(pairs)):
                r[f"eoc_{w}"] = eoc
        else:
            for r in rows[1:]:
                r[f"eoc_{w}"] = None
    with open(os.path.join(out_dir, "convergence.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CONVERGENCE_COLUMNS)
        for r in rows:
            w.writerow([r["N"]] + ["" if r[c] is None else "%.6e" % r[c] if c.startswith("e_")
                                   else "" if r[c] is None else "%.3f" % r[c]
                                   for c in CONVERGENCE_COLUMNS[1:]])
    write_manifest(os.path.join(out_dir, "manifest.json"), {
        "version": __version__, "commit": _git_commit(), "backend": _accel.backend(),
        "config": config_dict(cfg), "config_text": serialize_config(cfg),
        "levels": list(levels), "status": status})
    return status, rows


__all__ = ["RunConfig", "run_simulation", "run_convergence", "steady_errors", "time_grid", "setup"]
