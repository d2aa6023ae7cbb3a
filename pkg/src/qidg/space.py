"""Broken polynomial spaces, field coefficients, projection and facet traces."""
import numpy as np

from . import rng
from .basis import n_modes, reference_basis
from .errors import ShapeError
from .quadrature import quadrature_rule


def default_quad_degree(p):
    # W'(phi) tested against a basis function has degree 4p
    return max(4 * p, 2 * p + 2)


class DgSpace:
    """Discontinuous ``P^p`` space on ``mesh`` with an orthonormal modal basis.

    Geometry-dependent basis tables are built once:

    ``B[e, q, i]``, ``G[e, q, i, :]``
        physical basis values / gradients at volume quadrature points,
    ``W[e, q]``, ``X[e, q, :]``
        physical weights (reference weight times ``|det J|``) and points,
    ``fB[f, s, q, i]``, ``fG[f, s, q, i, :]``
        traces from side ``s`` (0 = K1, 1 = K2) at facet quadrature points,
        zero for side 1 of boundary facets,
    ``fW[f, q]``, ``fX[f, q, :]``
        facet weights (times facet measure) and points.
    """

    def __init__(self, mesh, degree, quad_degree=None):
        if int(degree) < 1:
            raise ValueError("polynomial degree must be >= 1")
        self.mesh = mesh
        self.dim = mesh.dim
        self.degree = int(degree)
        self.nb = n_modes(self.dim, self.degree)
        self.quad_degree = int(quad_degree or default_quad_degree(self.degree))
        self.n_elements = mesh.n_elements
        self.n_dofs = self.n_elements * self.nb

        d = self.dim
        self.vol_rule = quadrature_rule("interval" if d == 1 else "triangle", self.quad_degree)
        self.fac_rule = quadrature_rule("facet", self.quad_degree, dim=d)
        self.ref_B, self.ref_G = reference_basis(d, self.degree, self.vol_rule.points)

        scale = 1.0 / np.sqrt(mesh.detj)
        self.B = self.ref_B[None, :, :] * scale[:, None, None]
        # physical gradient: J^{-T} grad_ref
        self.G = np.einsum("kji,qbj->kqbi", mesh.invj, self.ref_G) * scale[:, None, None, None]
        self.W = self.vol_rule.weights[None, :] * mesh.detj[:, None]
        self.X = mesh.origin[:, None, :] + np.einsum("kij,qj->kqi", mesh.jac, self.vol_rule.points)
        self._build_facet_tables()

    def _build_facet_tables(self):
        mesh = self.mesh
        d = self.dim
        nf = mesh.n_facets
        pts = self.fac_rule.points
        nq = len(self.fac_rule)
        if d == 1:
            fX = mesh.vertices[mesh.facet_vertices[:, 0]][:, None, :]
        else:
            a = mesh.vertices[mesh.facet_vertices[:, 0]]
            b = mesh.vertices[mesh.facet_vertices[:, 1]]
            t = pts[:, 0]
            fX = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
        self.fX = fX
        self.fW = self.fac_rule.weights[None, :] * mesh.facet_measure[:, None]
        self.fB = np.zeros((nf, 2, nq, self.nb))
        self.fG = np.zeros((nf, 2, nq, self.nb, d))
        for side in (0, 1):
            ks = mesh.facet_elements[:, side]
            ok = ks >= 0
            k = ks[ok]
            xi = np.einsum("kij,kqj->kqi", mesh.invj[k], fX[ok] - mesh.origin[k][:, None, :])
            vals, grads = reference_basis(d, self.degree, xi.reshape(-1, d))
            vals = vals.reshape(len(k), nq, self.nb)
            grads = grads.reshape(len(k), nq, self.nb, d)
            scale = 1.0 / np.sqrt(mesh.detj[k])
            self.fB[ok, side] = vals * scale[:, None, None]
            self.fG[ok, side] = np.einsum("kji,kqbj->kqbi", mesh.invj[k], grads) * scale[:, None, None, None]
        self.fN = mesh.facet_normal
        self.fH = mesh.facet_h
        self.f_el = mesh.facet_elements
        self.bmask = mesh.boundary

    # -- evaluation on quadrature tables -------------------------------------------------
    def eval_quad(self, data):
        """``data (E, C, nb)`` -> values ``(E, nq, C)``, gradients ``(E, nq, C, d)``."""
        vals = np.einsum("kci,kqi->kqc", data, self.B)
        grads = np.einsum("kci,kqid->kqcd", data, self.G)
        return vals, grads

    def eval_facets(self, data):
        """Two-sided traces ``(F, 2, nqf, C)``; side 1 is zero on boundary facets."""
        k = np.maximum(self.f_el, 0)
        d0 = data[k[:, 0]]
        d1 = data[k[:, 1]]
        t0 = np.einsum("fci,fqi->fqc", d0, self.fB[:, 0])
        t1 = np.einsum("fci,fqi->fqc", d1, self.fB[:, 1])
        return np.stack([t0, t1], axis=1)

    def integrate(self, values):
        """Quadrature of per-point values ``(E, nq)``."""
        return float(np.einsum("kq,kq->", self.W, values))

    def __repr__(self):
        return f"DgSpace(p={self.degree}, {self.mesh!r})"


class FieldCoeffs:
    """Coefficients of a scalar (``ncomp=1``) or vector field in a DgSpace.

    ``data`` has shape ``(n_elements, ncomp, nb)``; the flat ``vector`` is
    element-major, then component, then mode.
    """

    def __init__(self, space, ncomp=1, data=None):
        self.space = space
        self.ncomp = int(ncomp)
        shape = (space.n_elements, self.ncomp, space.nb)
        if data is None:
            data = np.zeros(shape)
        else:
            data = np.asarray(data, dtype=float)
            if data.size != np.prod(shape):
                raise ShapeError(f"coefficient size {data.size} does not match {shape}")
            data = data.reshape(shape)
        self.data = data

    @property
    def vector(self):
        return self.data.reshape(-1)

    def copy(self):
        return FieldCoeffs(self.space, self.ncomp, self.data.copy())

    def __len__(self):
        return self.data.size

    def __repr__(self):
        return f"FieldCoeffs(ncomp={self.ncomp}, n={self.data.size})"


def basis_eval(space, element, point):
    """Physical basis values ``(nb,)`` and gradients ``(nb, d)`` at a reference point."""
    vals, grads = reference_basis(space.dim, space.degree, np.atleast_2d(point))
    mesh = space.mesh
    s = 1.0 / np.sqrt(mesh.detj[element])
    return vals[0] * s, (grads[0] @ mesh.invj[element]) * s


def eval_field(coeffs, element, point, component=None):
    """Value and gradient of ``coeffs`` at a reference point of ``element``.

    Scalars return ``(float, (d,))``; vector fields ``((C,), (C, d))`` with
    ``grad[c, j] = d v_c / d x_j``.
    """
    if component is not None and not 0 <= component < coeffs.ncomp:
        raise ShapeError(f"component {component} out of range for {coeffs.ncomp}-field")
    vals, grads = basis_eval(coeffs.space, element, point)
    c = coeffs.data[element]
    v = c @ vals
    g = c @ grads
    if component is not None:
        return v[component], g[component]
    if coeffs.ncomp == 1:
        return float(v[0]), g[0]
    return v, g


def _facet_point(space, facet, t):
    mesh = space.mesh
    if space.dim == 1:
        return mesh.vertices[mesh.facet_vertices[facet, 0]]
    a, b = mesh.vertices[mesh.facet_vertices[facet]]
    return a + float(np.ravel(t)[0]) * (b - a)


def facet_traces(coeffs, facet, point=0.0, tensor=False):
    """Average and jumps of a field at a facet point.

    ``facet`` is a facet index; ``point`` the facet reference coordinate in
    ``[0, 1]`` (ignored in 1D). Scalar fields give ``avg`` (scalar) and
    ``jump`` (vector ``v1 n1 + v2 n2``); vector fields give ``avg`` (vector),
    ``jump`` (scalar normal jump) and ``tensor_jump`` (``v1 (x) n1 + v2 (x) n2``).
    On boundary facets only the K1 trace enters: ``jump = v n``,
    ``avg = v``, ``tensor_jump = v (x) n``.
    """
    if tensor and coeffs.ncomp == 1:
        raise ShapeError("tensor jump is only defined for vector fields")
    space = coeffs.space
    mesh = space.mesh
    x = _facet_point(space, facet, point)
    k1, k2 = (int(k) for k in mesh.facet_elements[facet])
    n = mesh.facet_normal[facet]

    def trace(k):
        xi = mesh.to_reference(k, x)
        vals, _ = basis_eval(space, k, xi)
        return coeffs.data[k] @ vals

    v1 = trace(k1)
    v2 = trace(k2) if k2 >= 0 else None
    if coeffs.ncomp == 1:
        if v2 is None:
            return {"avg": float(v1[0]), "jump": v1[0] * n}
        return {"avg": 0.5 * float(v1[0] + v2[0]), "jump": (v1[0] - v2[0]) * n}
    if v2 is None:
        return {"avg": v1, "jump": float(v1 @ n), "tensor_jump": np.outer(v1, n)}
    return {"avg": 0.5 * (v1 + v2), "jump": float((v1 - v2) @ n),
            "tensor_jump": np.outer(v1 - v2, n)}


def l2_project(space, f, ncomp=None):
    """Elementwise L2 projection of ``f(x)`` (``x`` of shape ``(..., d)``)."""
    vals = np.asarray(f(space.X), dtype=float)
    if vals.ndim == 2:
        vals = vals[:, :, None]
    if ncomp is not None and vals.shape[-1] != ncomp:
        raise ShapeError(f"f returns {vals.shape[-1]} components, expected {ncomp}")
    data = np.einsum("kq,kqc,kqi->kci", space.W, vals, space.B)
    return FieldCoeffs(space, vals.shape[-1], data)


def project_quad_values(space, vals):
    """Project values given at the volume quadrature points ``(E, nq[, C])``."""
    if vals.ndim == 2:
        vals = vals[:, :, None]
    data = np.einsum("kq,kqc,kqi->kci", space.W, vals, space.B)
    return FieldCoeffs(space, vals.shape[-1], data)


def vertex_interpolant(space, vertex_values):
    """Represent the continuous piecewise-affine interpolant of vertex data."""
    mesh = space.mesh
    xi = space.vol_rule.points
    bary = np.concatenate([1.0 - xi.sum(axis=1, keepdims=True), xi], axis=1)
    vv = np.asarray(vertex_values, dtype=float)[mesh.elements]   # (E, d+1)
    vals = vv @ bary.T
    return project_quad_values(space, vals)


def random_vertex_field(space, seed, amplitude):
    """Uniform(-1, 1) draws at the mesh vertices (SplitMix64, see ``rng``),
    scaled by ``amplitude`` and interpolated continuously."""
    if not amplitude > 0:
        raise ValueError("amplitude must be positive")
    y = rng.uniform(seed, space.mesh.n_vertices)
    return vertex_interpolant(space, amplitude * y)


def eval_at_points(coeffs, elements, ref_points):
    """Values ``(n, C)`` at reference points ``ref_points[i]`` of ``elements[i]``."""
    space = coeffs.space
    elements = np.asarray(elements)
    vals, _ = reference_basis(space.dim, space.degree, ref_points)
    s = 1.0 / np.sqrt(space.mesh.detj[elements])
    return np.einsum("nci,ni->nc", coeffs.data[elements], vals) * s[:, None]


def l2_norm(coeffs, exact=None):
    """L2 norm of ``coeffs - exact`` by the space's volume quadrature."""
    space = coeffs.space
    vals, _ = space.eval_quad(coeffs.data)
    if exact is not None:
        ex = np.asarray(exact(space.X), dtype=float)
        if ex.ndim == 2:
            ex = ex[:, :, None]
        vals = vals - ex
    return float(np.sqrt(np.einsum("kq,kqc->", space.W, vals ** 2)))
