"""Conforming simplicial meshes (intervals in 1D, triangles in 2D) and their facet skeleton.

Reference elements are the unit interval ``[0, 1]`` and the triangle with
vertices ``(0, 0), (1, 0), (0, 1)``; every element carries the affine map
``x = x0 + J @ xi``.
"""
import re
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConformityError, InvalidSpecError, OutOfDomainError


@dataclass(frozen=True)
class Facet:
    vertices: tuple
    elements: tuple          # (K1,) on the boundary, (K1, K2) inside
    normal: np.ndarray       # unit, outward from K1
    measure: float
    boundary: bool

    @property
    def k1(self):
        return self.elements[0]

    @property
    def k2(self) -> Optional[int]:
        return self.elements[1] if len(self.elements) > 1 else None


class Mesh:
    """Immutable simplicial mesh with precomputed geometry and skeleton.

    Facet data is stored as parallel arrays (``facet_elements[f] = (K1, K2)``
    with ``K2 = -1`` on the boundary); :meth:`facet` returns a :class:`Facet`
    view for a single index.
    """

    def __init__(self, vertices, elements, label="mesh"):
        vertices = np.array(vertices, dtype=float)
        if vertices.ndim == 1:
            vertices = vertices[:, None]
        elements = np.array(elements, dtype=np.int64)
        self.dim = vertices.shape[1]
        if self.dim not in (1, 2):
            raise InvalidSpecError(f"only 1D and 2D meshes are supported, got d={self.dim}")
        if elements.ndim != 2 or elements.shape[1] != self.dim + 1:
            raise InvalidSpecError("elements must be (n, d+1) vertex index tuples")
        self.label = label
        self.vertices = vertices
        self.elements = _orient(vertices, elements)

        x0 = self.vertices[self.elements[:, 0]]
        jac = np.stack([self.vertices[self.elements[:, i + 1]] - x0
                        for i in range(self.dim)], axis=-1)
        det = np.linalg.det(jac)
        if np.any(det <= 0.0):
            raise InvalidSpecError("degenerate element (zero volume)")
        self.origin = x0
        self.jac = jac
        self.detj = det
        self.invj = np.linalg.inv(jac)
        ref_measure = 1.0 if self.dim == 1 else 0.5
        self.volume = det * ref_measure
        corners = self.vertices[self.elements]
        diff = corners[:, :, None, :] - corners[:, None, :, :]
        self.h = np.sqrt((diff ** 2).sum(-1)).max(axis=(1, 2))

        self._build_skeleton()
        for arr in (self.vertices, self.elements, self.origin, self.jac, self.detj,
                    self.invj, self.volume, self.h):
            arr.setflags(write=False)

    @property
    def n_elements(self):
        return len(self.elements)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_facets(self):
        return len(self.facet_elements)

    def _build_skeleton(self):
        d = self.dim
        local = _local_faces(d)
        table = {}
        verts, elems, lidx = [], [], []
        for k, el in enumerate(self.elements):
            for j, face in enumerate(local):
                key = tuple(sorted(int(el[i]) for i in face))
                f = table.get(key)
                if f is None:
                    table[key] = len(verts)
                    verts.append([int(el[i]) for i in face])
                    elems.append([k, -1])
                    lidx.append([j, -1])
                else:
                    if elems[f][1] != -1:
                        raise ConformityError(
                            f"facet {key} shared by more than two elements")
                    elems[f][1] = k
                    lidx[f][1] = j
        self.facet_vertices = np.array(verts, dtype=np.int64).reshape(-1, d)
        self.facet_elements = np.array(elems, dtype=np.int64)
        self.facet_local = np.array(lidx, dtype=np.int64)
        self.boundary = self.facet_elements[:, 1] < 0

        # outward normal from K1: away from the vertex of K1 opposite the facet
        k1 = self.facet_elements[:, 0]
        opp = self.vertices[self.elements[k1, self.facet_local[:, 0]]]
        if d == 1:
            p = self.vertices[self.facet_vertices[:, 0]]
            normal = np.sign(p - opp)
            measure = np.ones(len(p))
        else:
            a = self.vertices[self.facet_vertices[:, 0]]
            b = self.vertices[self.facet_vertices[:, 1]]
            t = b - a
            measure = np.hypot(t[:, 0], t[:, 1])
            normal = np.stack([t[:, 1], -t[:, 0]], axis=1) / measure[:, None]
            flip = np.einsum("ij,ij->i", normal, a - opp) < 0
            normal[flip] *= -1.0
        self.facet_normal = normal
        self.facet_measure = measure
        self.interior_facets = np.flatnonzero(~self.boundary)
        self.boundary_facets = np.flatnonzero(self.boundary)
        # penalty length scale on a facet: max h_K of the adjacent elements
        k2 = self.facet_elements[:, 1]
        h2 = np.where(k2 >= 0, self.h[np.maximum(k2, 0)], 0.0)
        self.facet_h = np.maximum(self.h[k1], h2)
        for arr in (self.facet_vertices, self.facet_elements, self.facet_local,
                    self.boundary, self.facet_normal, self.facet_measure,
                    self.interior_facets, self.boundary_facets, self.facet_h):
            arr.setflags(write=False)
        self._check_conformity()

    def _check_conformity(self):
        if self.dim == 1:
            if len(self.boundary_facets) != 2:
                raise ConformityError("1D mesh must be a single connected interval")
            return
        bverts = np.unique(self.facet_vertices[self.boundary_facets])
        pts = self.vertices[bverts]
        for f in self.boundary_facets:
            ia, ib = self.facet_vertices[f]
            a, b = self.vertices[ia], self.vertices[ib]
            t = b - a
            L2 = t @ t
            rel = pts - a
            s = rel @ t / L2
            dist = np.abs(rel[:, 0] * t[1] - rel[:, 1] * t[0]) / np.sqrt(L2)
            hit = (s > 1e-10) & (s < 1 - 1e-10) & (dist < 1e-10 * np.sqrt(L2))
            if np.any(hit):
                v = bverts[np.flatnonzero(hit)[0]]
                raise ConformityError(f"hanging vertex {v} on facet ({ia}, {ib})")

    def facet(self, f):
        k1, k2 = (int(x) for x in self.facet_elements[f])
        return Facet(
            vertices=tuple(int(v) for v in self.facet_vertices[f]),
            elements=(k1,) if k2 < 0 else (k1, k2),
            normal=self.facet_normal[f].copy(),
            measure=float(self.facet_measure[f]),
            boundary=bool(self.boundary[f]),
        )

    def to_reference(self, element, x):
        """Map physical point(s) into the reference frame of ``element``."""
        x = np.asarray(x, dtype=float)
        return (x - self.origin[element]) @ self.invj[element].T

    def to_physical(self, element, xi):
        xi = np.asarray(xi, dtype=float)
        return self.origin[element] + xi @ self.jac[element].T

    def measure(self):
        return float(self.volume.sum())

    def boundary_measure(self):
        return float(self.facet_measure[self.boundary_facets].sum())

    def __repr__(self):
        return (f"Mesh({self.label!r}, d={self.dim}, elements={self.n_elements}, "
                f"vertices={self.n_vertices})")


def _local_faces(d):
    # face j is opposite local vertex j
    if d == 1:
        return [(1,), (0,)]
    return [(1, 2), (2, 0), (0, 1)]


def _orient(vertices, elements):
    elements = elements.copy()
    if vertices.shape[1] == 1:
        x = vertices[elements, 0]
        swap = x[:, 0] > x[:, 1]
        elements[swap] = elements[swap][:, ::-1]
        return elements
    p = vertices[elements]
    area2 = ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
             - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))
    cw = area2 < 0
    elements[cw] = elements[cw][:, [0, 2, 1]]
    return elements


def interval_mesh(a, b, n):
    if not a < b:
        raise InvalidSpecError(f"interval bounds must satisfy a < b, got [{a}, {b}]")
    if int(n) < 1:
        raise InvalidSpecError("interval needs at least one element")
    n = int(n)
    x = np.linspace(a, b, n + 1)
    el = np.stack([np.arange(n), np.arange(1, n + 1)], axis=1)
    return Mesh(x, el, label=f"interval({a:g},{b:g},{n})")


def rectangle_mesh(a, b, c, d, nx, ny):
    """Criss-cross triangulation: every cell is split into four triangles
    meeting at the cell centre."""
    if not (a < b and c < d):
        raise InvalidSpecError(f"rectangle bounds must be ordered, got [{a},{b}]x[{c},{d}]")
    nx, ny = int(nx), int(ny)
    if nx < 1 or ny < 1:
        raise InvalidSpecError("rectangle needs at least one cell per direction")
    xs = np.linspace(a, b, nx + 1)
    ys = np.linspace(c, d, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    corners = np.stack([X.ravel(), Y.ravel()], axis=1)
    xc = 0.5 * (xs[:-1] + xs[1:])
    yc = 0.5 * (ys[:-1] + ys[1:])
    XC, YC = np.meshgrid(xc, yc, indexing="ij")
    centres = np.stack([XC.ravel(), YC.ravel()], axis=1)
    verts = np.vstack([corners, centres])

    def vid(i, j):
        return i * (ny + 1) + j

    tris = []
    nc = len(corners)
    for i in range(nx):
        for j in range(ny):
            m = nc + i * ny + j
            c0, c1, c2, c3 = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            tris += [(c0, c1, m), (c1, c2, m), (c2, c3, m), (c3, c0, m)]
    return Mesh(verts, tris, label=f"rectangle({a:g},{b:g},{c:g},{d:g},{nx},{ny})")


def disk_mesh(radius, rings):
    """Polygonal disk: concentric rings of 6k vertices around the centre."""
    rings = int(rings)
    if rings < 1:
        raise InvalidSpecError("disk needs at least one ring")
    if not radius > 0:
        raise InvalidSpecError("disk radius must be positive")
    verts = [(0.0, 0.0)]
    ring_ids = [[0]]
    for k in range(1, rings + 1):
        r = radius * k / rings
        n = 6 * k
        th = 2 * np.pi * np.arange(n) / n
        ids = list(range(len(verts), len(verts) + n))
        verts += list(zip(r * np.cos(th), r * np.sin(th)))
        ring_ids.append(ids)
    verts = np.array(verts)
    tris = []
    for k in range(1, rings + 1):
        inner, outer = ring_ids[k - 1], ring_ids[k]
        if k == 1:
            for j in range(6):
                tris.append((0, outer[j], outer[(j + 1) % 6]))
            continue
        ni, no = len(inner), len(outer)
        i = j = 0
        # merge walk by angle around the annulus
        while i < ni or j < no:
            ang_i = 2 * np.pi * (i + 1) / ni
            ang_o = 2 * np.pi * (j + 1) / no
            if j < no and (i >= ni or ang_o <= ang_i + 1e-12):
                tris.append((inner[i % ni], outer[j], outer[(j + 1) % no]))
                j += 1
            else:
                tris.append((inner[i % ni], outer[j % no], inner[(i + 1) % ni]))
                i += 1
    return Mesh(verts, tris, label=f"disk({radius:g},{rings})")


_SPEC_RE = re.compile(r"^\s*(interval|rectangle|disk)\s*\(([^)]*)\)\s*$")


def parse_mesh_spec(spec):
    """``"interval(a,b,N)"`` etc. -> ``(kind, args)``."""
    if isinstance(spec, (tuple, list)):
        kind, *args = spec
        return str(kind), tuple(args)
    m = _SPEC_RE.match(str(spec))
    if not m:
        raise InvalidSpecError(f"cannot parse mesh spec {spec!r}")
    kind = m.group(1)
    try:
        args = tuple(float(t) for t in m.group(2).split(",") if t.strip())
    except ValueError as exc:
        raise InvalidSpecError(f"bad number in mesh spec {spec!r}") from exc
    return kind, args


_ARITY = {"interval": 3, "rectangle": 6, "disk": 2}


def build_mesh(spec):
    """Build a mesh from a descriptor.

    Accepted forms: ``"interval(a,b,N)"``, ``"rectangle(a,b,c,d,Nx,Ny)"``
    (criss-cross) and ``"disk(R,rings)"``, or the equivalent tuples such as
    ``("interval", -1, 1, 4)``.
    """
    kind, args = parse_mesh_spec(spec)
    if kind not in _ARITY:
        raise InvalidSpecError(f"unknown domain kind {kind!r}")
    if len(args) != _ARITY[kind]:
        raise InvalidSpecError(f"{kind} expects {_ARITY[kind]} arguments, got {len(args)}")
    counts = args[-1:] if kind != "rectangle" else args[-2:]
    if any(float(c) != int(c) for c in counts):
        raise InvalidSpecError("element counts must be integers")
    if kind == "interval":
        return interval_mesh(args[0], args[1], int(args[2]))
    if kind == "rectangle":
        return rectangle_mesh(*args[:4], int(args[4]), int(args[5]))
    return disk_mesh(args[0], int(args[1]))


def compute_skeleton(mesh):
    """Return ``(interior, boundary)`` lists of :class:`Facet`."""
    interior = [mesh.facet(f) for f in mesh.interior_facets]
    boundary = [mesh.facet(f) for f in mesh.boundary_facets]
    return interior, boundary


def meshsize_at(mesh, x, tol=1e-12):
    """Largest diameter among the elements whose closure contains ``x``."""
    ids = elements_containing(mesh, x, tol)
    if len(ids) == 0:
        raise OutOfDomainError(f"point {x} is outside the mesh")
    return float(mesh.h[ids].max())


def elements_containing(mesh, x, tol=1e-12):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    xi = np.einsum("kij,kj->ki", mesh.invj, x[None, :] - mesh.origin)
    bary = np.concatenate([xi, 1.0 - xi.sum(axis=1, keepdims=True)], axis=1)
    return np.flatnonzero(np.all(bary >= -tol, axis=1))


def write_mesh(mesh, path):
    """Plain-text dump: vertex table then element table, 0-based indices."""
    with open(path, "w") as fh:
        fh.write(f"# qidg mesh {mesh.label}\n")
        fh.write(f"vertices {mesh.n_vertices} {mesh.dim}\n")
        for v in mesh.vertices:
            fh.write(" ".join(repr(float(c)) for c in v) + "\n")
        fh.write(f"elements {mesh.n_elements} {mesh.dim + 1}\n")
        for el in mesh.elements:
            fh.write(" ".join(str(int(i)) for i in el) + "\n")


def read_mesh(path):
    with open(path) as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
    head = lines[0].split()
    nv = int(head[1])
    verts = np.array([[float(t) for t in ln.split()] for ln in lines[1:1 + nv]])
    ne = int(lines[1 + nv].split()[1])
    els = np.array([[int(t) for t in ln.split()] for ln in lines[2 + nv:2 + nv + ne]])
    return Mesh(verts, els, label=str(path))
