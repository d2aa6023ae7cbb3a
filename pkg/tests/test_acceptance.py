"""Acceptance criteria, one test each.

Every test records exactly one ``PASS``/``FAIL`` line. The lines are printed
as they are produced (visible with ``-s``), again in the pytest terminal
summary, and by running this file directly::

    python tests/test_acceptance.py

Runs shared between criteria (the 1D and 2D random-perturbation runs) are
computed once per session. The 2D run takes most of the time.
"""
import math
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from qidg.checks import run_checks
from qidg.config import parse_config, with_overrides
from qidg.drivers import run_convergence, run_simulation

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"
LEVELS = [32, 64, 128, 256, 512, 1024]
NEWTON_TOL = 1e-10

# reference magnitudes of e_phi at N = 1024, printed for comparison only
REFERENCE_1024 = {1: 6.7240e-04, 2: 1.8023e-05}

RESULTS = []


def report(n, title, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {title} | {detail}"
    RESULTS.append(line)
    print(line)
    return ok


def load(name, **overrides):
    cfg = parse_config((CONFIGS / name).read_text())
    cfg = with_overrides(cfg, newton=replace(cfg.newton, tol=NEWTON_TOL))
    return with_overrides(cfg, **overrides) if overrides else cfg


class Run:
    def __init__(self, status, rows, seconds):
        self.status = status
        self.rows = rows
        self.seconds = seconds

    def column(self, name, start=0):
        return np.array([r[name] for r in self.rows[start:]], dtype=float)

    @property
    def max_deviation(self):
        return float(np.max(np.abs(self.column("deviation", 1)))) if len(self.rows) > 1 else 0.0

    @property
    def mass_drift(self):
        m = self.column("mass")
        return float(np.max(np.abs(m - m[0])) / abs(m[0]))

    @property
    def worst_energy_rise(self):
        E = self.column("energy")
        return float(np.max(np.diff(E)) / abs(E[0])) if len(E) > 1 else -math.inf


_CACHE = {}


@pytest.fixture(scope="session")
def run(tmp_path_factory):
    def get(name, steps=None):
        key = (name, steps)
        if key not in _CACHE:
            cfg = load(name)
            if steps is not None:
                k = float(cfg.timestep) if cfg.timestep != "h2" else None
                cfg = with_overrides(cfg, final_time=steps * k)
            out = tmp_path_factory.mktemp(name.replace(".cfg", ""))
            t0 = time.perf_counter()
            status, rows = run_simulation(cfg, str(out), log=None)
            _CACHE[key] = Run(status, rows, time.perf_counter() - t0)
        return _CACHE[key]
    return get


def _convergence(name, tmp_path):
    cfg = load(name)
    status, rows = run_convergence(cfg, LEVELS, str(tmp_path), log=None)
    assert status == 0
    return rows


def test_criterion_1_convergence_p1(tmp_path):
    rows = _convergence("converge_p1.cfg", tmp_path)
    eoc = rows[-1]["eoc_phi"]
    e1024 = rows[-1]["e_phi"]
    ok = 1.75 <= eoc <= 2.35
    all_eoc = ", ".join(f"{r['eoc_phi']:.2f}" for r in rows[1:])
    report(1, "p=1 steady-profile EOC_phi in [1.75, 2.35]", ok,
           f"EOC {eoc:.3f} (all: {all_eoc}); "
           f"e_phi(1024) = {e1024:.3e}, reference {REFERENCE_1024[1]:.3e}")
    assert ok


def test_criterion_2_convergence_p2(tmp_path):
    rows = _convergence("converge_p2.cfg", tmp_path)
    eoc = rows[-1]["eoc_phi"]
    ok = 2.7 <= eoc <= 3.7
    report(2, "p=2 steady-profile EOC_phi in [2.7, 3.7]", ok,
           f"EOC {eoc:.3f}; EOC_v {rows[-1]['eoc_v']:.3f}; e_phi(1024) = {rows[-1]['e_phi']:.3e}, "
           f"reference {REFERENCE_1024[2]:.3e}")
    assert ok


SHORT = ["test1.cfg", "test3.cfg", "test4.cfg", "test5.cfg", "test6.cfg", "test6_ratio100.cfg",
         "parasitic_1d.cfg", "converge_p1.cfg", "converge_p2.cfg"]
FULL = ["test2_1d.cfg", "test2.cfg"]


def test_criterion_3_energy_audit(run):
    shipped = sorted(p.name for p in CONFIGS.glob("*.cfg"))
    assert sorted(SHORT + FULL) == shipped, "every shipped config must be audited"
    worst = {}
    for name in SHORT:
        worst[name] = run(name, steps=5)
    for name in FULL:
        worst[name] = run(name)
    failed = [n for n, r in worst.items() if r.status != 0]
    dev = {n: r.max_deviation for n, r in worst.items()}
    top = max(dev.values())
    ok = not failed and top <= 1e-8
    report(3, "per-step energy deviation <= 1e-8 on every shipped config", ok,
           f"max {top:.2e}; 100-step 1D random run max {dev['test2_1d.cfg']:.2e}; "
           f"2D random run max {dev['test2.cfg']:.2e}" + (f"; failed: {failed}" if failed else ""))
    assert ok


def test_criterion_4_mass(run):
    runs = {n: run(n) for n in ("test2_1d.cfg", "test2.cfg", "test1.cfg")}
    drift = {n: r.mass_drift for n, r in runs.items()}
    steps = {n: len(r.rows) - 1 for n, r in runs.items()}
    ok = all(r.status == 0 for r in runs.values()) and max(drift.values()) <= 1e-9 \
        and min(steps.values()) >= 100
    report(4, "relative mass drift <= 1e-9 over 100-step runs", ok,
           "; ".join(f"{n} {drift[n]:.1e} ({steps[n]} steps)" for n in runs))
    assert ok


def test_criterion_5_monotone_energy(run):
    r1 = run("test2_1d.cfg")
    r2 = run("test2.cfg")
    rise1, rise2 = r1.worst_energy_rise, r2.worst_energy_rise
    t_end = (r1.rows[-1]["t"], r2.rows[-1]["t"])
    ok = (r1.status == r2.status == 0 and rise1 <= 1e-9 and rise2 <= 1e-9
          and min(t_end) >= 1.0 - 1e-12 and r2.seconds <= 1800)
    report(5, "energy non-increasing (1e-9 E0 per step), 1D N=256 and 2D h=0.05 to T=1", ok,
           f"largest relative rise 1D {rise1:.1e}, 2D {rise2:.1e}; "
           f"energy 2D {r2.rows[0]['energy']:.4f} -> {r2.rows[-1]['energy']:.4f}; "
           f"2D wall time {r2.seconds / 60:.1f} min")
    assert ok


def test_criterion_6_parasitic_currents(run):
    r = run("parasitic_1d.cfg")
    vmax = float(np.max(r.column("max_velocity")))
    ok = r.status == 0 and len(r.rows) - 1 >= 100 and vmax <= 1e-5
    report(6, "discrete steady interface held 100 steps, max|v| <= 1e-5", ok,
           f"max|v| {vmax:.2e} over {len(r.rows) - 1} steps")
    assert ok


T6_STEPS = 1000


def test_criterion_7_high_density_ratio(run):
    out = []
    ok = True
    for name, limit in (("test6.cfg", 1.03 + 0.005), ("test6_ratio100.cfg", 1.01 + 0.005)):
        r = run(name, steps=T6_STEPS)
        rho = float(np.min(r.column("min_density")))
        phi = float(np.max(r.column("max_phi")))
        ok &= r.status == 0 and rho > 0 and phi <= limit
        out.append(f"{name}: min rho {rho:.4f}, max phi {phi:.4f} (limit {limit:.3f})")
    report(7, "density ratios 10 and 100 stay positive with bounded overshoot", ok, "; ".join(out))
    assert ok


def test_criterion_8_rotating_frame(run):
    r = run("test4.cfg")
    ok = r.status == 0 and r.max_deviation <= 1e-8 and r.mass_drift <= 1e-9
    pot = r.column("potential")
    report(8, "rotating disk, NS stress: modified-energy deviation <= 1e-8, mass conserved", ok,
           f"max deviation {r.max_deviation:.2e}; mass drift {r.mass_drift:.1e}; "
           f"rotating-frame term {pot[0]:.4f}; {len(r.rows) - 1} steps")
    assert ok


def test_criterion_9_property_suite():
    t0 = time.perf_counter()
    results = run_checks(log=None)
    secs = time.perf_counter() - t0
    bad = [c.name for c in results if not c.passed]
    ok = not bad and secs < 60
    report(9, "property suite passes in under a minute", ok,
           f"{len(results) - len(bad)}/{len(results)} checks in {secs:.1f} s"
           + (f"; failing: {bad}" if bad else ""))
    assert ok


if __name__ == "__main__":  # pragma: no cover
    import sys
    sys.exit(pytest.main([__file__, "-q", "-s"]))
