import numpy as np
import pytest

from qidg.mesh import build_mesh
from qidg.model import ModelParams
from qidg.output import (TIMESERIES_COLUMNS, TimeSeriesWriter, read_columns, read_timeseries,
                         write_field_snapshot)
from qidg.scheme import initial_state
from qidg.space import DgSpace


def test_pure_phase_columns(tmp_path):
    space = DgSpace(build_mesh("interval(-1,1,5)"), 2)
    s = initial_state(space, ModelParams(), "pure-phase")
    path = write_field_snapshot(s, tmp_path / "s.dat")
    names, data = read_columns(path)
    assert names == ["x", "phi", "v1", "lam", "a", "b", "q1"]
    assert len(data) == 5 * 3
    assert np.all(np.abs(data[:, 1] - 1.0) <= 1e-13)
    assert data[0, 0] == -1.0 and data[-1, 0] == 1.0


@pytest.mark.parametrize("spec,name", [("interval(-1,1,6)", "a.dat"), ("disk(1,2)", "a.vtk")])
def test_snapshot_byte_identical(tmp_path, spec, name):
    space = DgSpace(build_mesh(spec), 1)
    s = initial_state(space, ModelParams(), "random", seed=4)
    a = write_field_snapshot(s, tmp_path / name)
    b = write_field_snapshot(s.copy(), tmp_path / ("b" + name))
    assert open(a, "rb").read() == open(b, "rb").read()


def test_vtk_header_and_counts(tmp_path):
    space = DgSpace(build_mesh("rectangle(0,1,0,1,2,2)"), 1)
    s = initial_state(space, ModelParams(), "bubbles")
    text = open(write_field_snapshot(s, tmp_path / "b.vtk")).read().splitlines()
    assert text[0].startswith("# vtk DataFile Version")
    assert "DATASET UNSTRUCTURED_GRID" in text
    assert f"POINTS {3 * 16} double" in text
    assert f"CELL_DATA 16" in text


def test_format_errors(tmp_path):
    space = DgSpace(build_mesh("interval(0,1,2)"), 1)
    s = initial_state(space, ModelParams(), "pure-phase")
    with pytest.raises(ValueError):
        write_field_snapshot(s, tmp_path / "x.vtk", "vtk-legacy")
    with pytest.raises(ValueError):
        write_field_snapshot(s, tmp_path / "x.bin", "hdf5")


def test_timeseries_round_trip(tmp_path):
    with TimeSeriesWriter(tmp_path / "ts.csv") as w:
        w.write({"step": 0, "t": 0.0, "energy": 1.5})
        w.write({"step": 1, "t": 0.01, "energy": 1.25, "deviation": -3e-15})
    rows = read_timeseries(tmp_path / "ts.csv")
    assert list(rows[0]) == list(TIMESERIES_COLUMNS)
    assert rows[1]["deviation"] == -3e-15 and np.isnan(rows[0]["deviation"])
