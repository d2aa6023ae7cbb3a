import numpy as np
import pytest

from qidg.errors import ConformityError, InvalidSpecError, OutOfDomainError
from qidg.mesh import (Mesh, build_mesh, compute_skeleton, meshsize_at, read_mesh,
                       write_mesh)


def tri_area(p):
    (x0, y0), (x1, y1), (x2, y2) = p
    return 0.5 * abs((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0))


def test_interval_counts():
    m = build_mesh("interval(-1,1,4)")
    assert (m.n_elements, m.n_vertices) == (4, 5)
    interior, boundary = compute_skeleton(m)
    assert len(interior) == 3 and len(boundary) == 2


def test_criss_cross_area_by_hand():
    m = build_mesh("rectangle(0,1,0,1,2,2)")
    assert m.n_elements == 16
    by_hand = sum(tri_area(m.vertices[el]) for el in m.elements)
    assert by_hand == pytest.approx(1.0, abs=1e-14)
    assert m.measure() == pytest.approx(by_hand, abs=1e-14)


def test_single_element_diameter():
    assert build_mesh("interval(0,1,1)").h[0] == 1.0


def test_interior_facet_normal_1d():
    m = build_mesh("interval(-1,1,2)")
    interior, _ = compute_skeleton(m)
    (f,) = interior
    assert m.vertices[f.vertices[0]][0] == 0.0
    assert f.normal[0] == 1.0
    assert m.vertices[m.elements[f.k1]].max() == 0.0    # K1 is the left element


def test_single_cell_criss_cross_skeleton():
    m = build_mesh("rectangle(0,1,0,1,1,1)")
    interior, boundary = compute_skeleton(m)
    assert len(interior) == 4 and len(boundary) == 4
    centre = np.array([0.5, 0.5])
    for f in interior:
        assert any(np.allclose(m.vertices[v], centre) for v in f.vertices)


@pytest.mark.parametrize("spec", ["interval(0,2,5)", "rectangle(0,1,0,2,3,2)", "disk(1,3)"])
def test_incidences_match_face_count(spec):
    m = build_mesh(spec)
    interior, boundary = compute_skeleton(m)
    assert 2 * len(interior) + len(boundary) == m.n_elements * (m.dim + 1)


@pytest.mark.parametrize("spec", ["rectangle(0,1,0,2,3,2)", "disk(1,3)"])
def test_normals_point_out_of_k1(spec):
    m = build_mesh(spec)
    for f in range(m.n_facets):
        k1 = m.facet_elements[f][0]
        centroid = m.vertices[m.elements[k1]].mean(axis=0)
        mid = m.vertices[m.facet_vertices[f]].mean(axis=0)
        assert (mid - centroid) @ m.facet_normal[f] > 0
        assert np.linalg.norm(m.facet_normal[f]) == pytest.approx(1.0)


def test_boundary_length_of_square():
    assert build_mesh("rectangle(0,1,0,1,3,3)").boundary_measure() == pytest.approx(4.0)


def test_disk_is_polygon_inside_circle():
    m = build_mesh("disk(1,4)")
    assert np.all(np.linalg.norm(m.vertices, axis=1) <= 1.0 + 1e-12)
    assert 3.0 < m.measure() < np.pi


def test_meshsize_uniform():
    m = build_mesh("interval(-1,1,4)")
    for x in (-1.0, -0.3, 0.0, 0.5, 1.0):
        assert meshsize_at(m, x) == 0.5


def test_meshsize_graded_takes_max_at_vertex():
    m = Mesh([0.0, 0.2, 1.0], [[0, 1], [1, 2]])
    assert meshsize_at(m, 0.2) == pytest.approx(0.8)
    assert meshsize_at(m, 0.1) == pytest.approx(0.2)


def test_meshsize_outside():
    with pytest.raises(OutOfDomainError):
        meshsize_at(build_mesh("interval(0,1,2)"), 1.5)


@pytest.mark.parametrize("spec", ["interval(1,1,3)", "interval(2,1,3)", "rectangle(0,0,0,1,2,2)",
                                  "interval(0,1,0)", "square(0,1)", "interval(0,1)", "disk(1,2.5)"])
def test_bad_specs(spec):
    with pytest.raises(InvalidSpecError):
        build_mesh(spec)


def test_hanging_vertex_rejected():
    # two triangles on the left share an edge that the right triangle sees whole
    verts = [[0, 0], [1, 0], [1, 1], [0, 1], [1, 0.5], [2, 0.5]]
    els = [[0, 1, 4], [0, 4, 3], [3, 4, 2], [1, 5, 2]]
    with pytest.raises(ConformityError):
        Mesh(verts, els)


def test_mesh_dump_round_trip(tmp_path):
    m = build_mesh("disk(1,2)")
    write_mesh(m, tmp_path / "m.txt")
    m2 = read_mesh(tmp_path / "m.txt")
    assert np.array_equal(m.vertices, m2.vertices)
    assert np.array_equal(m.elements, m2.elements)
