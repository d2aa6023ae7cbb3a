"""File output: time series CSV, field snapshots, run manifest.

Snapshot formats
----------------
``columns`` (1D): a header line ``# x phi v1 lam a b q1`` followed by one
row per sample point; each element is sampled at ``p + 1`` equally spaced
points including both end points, so discontinuities show up as repeated
abscissae. Numbers are written with ``%.17g``.

``vtk-legacy`` (2D): ASCII legacy VTK ``UNSTRUCTURED_GRID``. Every element
contributes its own three vertices (fields are discontinuous), cells are
triangles (type 5). ``POINT_DATA`` carries the scalars ``phi``, ``lam``,
``a``, ``b`` and the vectors ``v``, ``q`` (third component 0), evaluated
at the element vertices; ``CELL_DATA`` carries the element means of the
scalars. Numbers are written with ``%.9g``.
"""
import csv
import io
import json
import math

import numpy as np

from .basis import reference_basis
from .space import FieldCoeffs, eval_at_points

TIMESERIES_COLUMNS = ("step", "t", "energy", "mass", "deviation", "max_velocity",
                      "reaction", "diffusion", "viscous", "potential", "min_density",
                      "max_phi", "newton_iterations", "residual")


def _num(x):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % x


class TimeSeriesWriter:
    """Appends one row per time level; cells without a value are left empty."""

    def __init__(self, path):
        self._fh = open(path, "w", newline="")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(TIMESERIES_COLUMNS)

    def write(self, row):
        self._w.writerow([_num(row.get(c)) for c in TIMESERIES_COLUMNS])
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_timeseries(path):
    """Rows as dicts of floats (``nan`` for empty cells)."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [{k: (float(v) if v != "" else math.nan) for k, v in r.items()} for r in rows]


def _physical(mesh, els, pts):
    return mesh.origin[els] + np.einsum("nij,nj->ni", mesh.jac[els], pts)


def _field_table(state):
    """Component names and the per-element coefficient block."""
    d = state.space.dim
    names = (["phi"] + [f"v{i + 1}" for i in range(d)] + ["lam", "a", "b"]
             + [f"q{i + 1}" for i in range(d)])
    X = state.to_vector().reshape(state.space.n_elements, -1, state.space.nb)
    return names, X


def _columns_text(state):
    space = state.space
    mesh = space.mesh
    p = space.degree
    names, X = _field_table(state)
    xi = np.linspace(0.0, 1.0, p + 1)[:, None]
    E = mesh.n_elements
    els = np.repeat(np.arange(E), p + 1)
    pts = np.tile(xi, (E, 1))
    coeffs = FieldCoeffs(space, X.shape[1], X)
    vals = eval_at_points(coeffs, els, pts)
    x = _physical(mesh, els, pts)[:, 0]
    buf = io.StringIO()
    buf.write("# x " + " ".join(names) + "\n")
    for i in range(len(x)):
        buf.write(" ".join("%.17g" % v for v in (x[i], *vals[i])) + "\n")
    return buf.getvalue()


def _vtk_text(state, title="qidg snapshot"):
    space = state.space
    mesh = space.mesh
    d = space.dim
    names, X = _field_table(state)
    coeffs = FieldCoeffs(space, X.shape[1], X)
    E = mesh.n_elements
    ref = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    els = np.repeat(np.arange(E), 3)
    pts = np.tile(ref, (E, 1))
    vals = eval_at_points(coeffs, els, pts)
    xy = _physical(mesh, els, pts)
    # the constant mode is the only one with nonzero mean
    mode0 = reference_basis(d, space.degree, np.array([[1.0 / 3, 1.0 / 3]]))[0][0, 0]
    means = X[:, :, 0] * mode0 / np.sqrt(mesh.detj)[:, None]
    f = "%.9g"
    out = io.StringIO()
    out.write("# vtk DataFile Version 3.0\n")
    out.write(f"{title}\nASCII\nDATASET UNSTRUCTURED_GRID\n")
    out.write(f"POINTS {3 * E} double\n")
    for x, y in xy:
        out.write(f"{f % x} {f % y} 0\n")
    out.write(f"CELLS {E} {4 * E}\n")
    for e in range(E):
        out.write(f"3 {3 * e} {3 * e + 1} {3 * e + 2}\n")
    out.write(f"CELL_TYPES {E}\n")
    out.write("5\n" * E)
    scal = {n: i for i, n in enumerate(names) if not n[-1].isdigit()}
    out.write(f"POINT_DATA {3 * E}\n")
    for n, i in scal.items():
        out.write(f"SCALARS {n} double 1\nLOOKUP_TABLE default\n")
        out.write("".join(f"{f % v}\n" for v in vals[:, i]))
    for n in ("v", "q"):
        i0 = names.index(f"{n}1")
        out.write(f"VECTORS {n} double\n")
        for row in vals[:, i0:i0 + d]:
            out.write(f"{f % row[0]} {f % row[1]} 0\n")
    out.write(f"CELL_DATA {E}\n")
    for n, i in scal.items():
        out.write(f"SCALARS {n}_mean double 1\nLOOKUP_TABLE default\n")
        out.write("".join(f"{f % v}\n" for v in means[:, i]))
    return out.getvalue()


def write_field_snapshot(state, path, format=None):
    """Write ``state`` as ``columns`` (1D) or ``vtk-legacy`` (2D).

    ``format=None`` picks by dimension. The output depends only on the state.
    """
    d = state.space.dim
    format = format or ("columns" if d == 1 else "vtk-legacy")
    if format == "columns":
        if d != 1:
            raise ValueError("the columns format is for 1D states")
        text = _columns_text(state)
    elif format == "vtk-legacy":
        if d != 2:
            raise ValueError("the vtk-legacy writer is for 2D states")
        text = _vtk_text(state)
    else:
        raise ValueError(f"unknown snapshot format {format!r}")
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    return path


def read_columns(path):
    """Inverse of the ``columns`` writer: ``(names, array)``."""
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("# "):
            raise ValueError("not a columns snapshot")
        names = header[2:].split()
        data = np.loadtxt(fh, ndmin=2)
    return names, data


def write_manifest(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
