"""Compare the numba and numpy assembly backends.

    python benchmarks/bench_kernels.py [--repeat 5]

For each problem the residual and the Jacobian are assembled with both
backends (after a warm-up call that also triggers numba compilation) and the
best wall time of ``--repeat`` calls is reported, along with the largest
difference between the two results.
"""
import argparse
import time

import numpy as np

from qidg import _accel
from qidg.mesh import build_mesh
from qidg.model import ModelParams
from qidg.scheme import get_operator
from qidg.space import DgSpace

PROBLEMS = [
    ("1D p1, N=1024", "interval(-1,1,1024)", 1, ModelParams()),
    ("1D p2, N=1024", "interval(-1,1,1024)", 2, ModelParams()),
    ("2D p1, 40x40 criss-cross", "rectangle(-1,1,-1,1,40,40)", 1, ModelParams()),
    ("2D p2, 16x16, NS + rotation", "rectangle(-1,1,-1,1,16,16)", 2,
     ModelParams(viscosity="ns", eta1=1e-3, eta2=5e-3, omega=1.0)),
]


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    before = _accel.backend()
    rng = np.random.default_rng(0)
    print(f"{'problem':32s} {'dofs':>8s} {'what':>9s} {'numba [ms]':>11s} {'numpy [ms]':>11s} "
          f"{'speed-up':>9s} {'max diff':>9s}")
    try:
        for title, spec, p, params in PROBLEMS:
            space = DgSpace(build_mesh(spec), p)
            op = get_operator(space, params)
            Uo = 0.1 * rng.standard_normal(op.N)
            Un = Uo + 0.01 * rng.standard_normal(op.N)
            for what, fn in (("residual", lambda: op.residual(Uo, Un, 0.01)),
                             ("jacobian", lambda: op.jacobian(Uo, Un, 0.01))):
                t, out = {}, {}
                for name in ("numba", "numpy"):
                    _accel.set_backend(name)
                    t[name] = best_of(fn, args.repeat)
                    out[name] = fn()
                diff = out["numba"] - out["numpy"]
                diff = float(abs(diff).max())
                print(f"{title:32s} {op.N:8d} {what:>9s} {1e3 * t['numba']:11.2f} "
                      f"{1e3 * t['numpy']:11.2f} {t['numpy'] / t['numba']:9.2f} {diff:9.1e}")
    finally:
        _accel.set_backend(before)


if __name__ == "__main__":
    main()
