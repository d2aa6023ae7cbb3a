"""Symmetric interior penalty forms.

All forms are assembled once into sparse matrices acting on the flat
coefficient layout of :class:`~qidg.space.FieldCoeffs` (element-major,
then component, then mode), so that ``A(u, w) = w.vector @ M @ u.vector``.

``A1``
    scalar Laplacian, facet terms on interior facets only (natural
    zero-Neumann condition).
``A2``
    vector Laplacian with Frobenius products, facet terms and penalty on
    interior and boundary facets (weak ``v = 0``).
``A2_ns``
    bulk/shear Navier-Stokes tensor with coefficients ``eta1 - 2 eta2 / d``
    and ``eta2``; consistency terms on all facets, penalty on interior
    facets and, by default, on the boundary as well.
"""
import warnings

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from .errors import ShapeError


def min_penalty(space_or_degree, degree=None):
    """Default penalty ``10 (p + 1)^2``."""
    p = degree if degree is not None else getattr(space_or_degree, "degree", space_or_degree)
    p = int(p)
    if p < 1:
        raise ValueError("degree must be >= 1")
    return 10.0 * (p + 1) ** 2


def _vol_features(space, ncomp):
    """Volume gradient features ``D[e, q, m, a, b]`` of every local dof ``m = (c, i)``:
    the gradient tensor ``d v_a / d x_b`` of the basis field ``e_c phi_i``."""
    E, nq, nb, d = space.G.shape
    D = np.zeros((E, nq, ncomp, nb, ncomp, d))
    for c in range(ncomp):
        D[:, :, c, :, c, :] = space.G
    return D.reshape(E, nq, ncomp * nb, ncomp, d)


def _facet_features(space, ncomp):
    """Facet features per side: tensor jump ``T`` and average gradient ``Dav``
    with shapes ``(F, 2, nq, ncomp*nb, ncomp, d)``.

    Side 1 of a boundary facet carries zero tables, and the average on a
    boundary facet is the one-sided trace."""
    F, _, nq, nb = space.fB.shape
    d = space.dim
    n = space.fN
    wav = np.where(space.bmask, 1.0, 0.5)
    T = np.zeros((F, 2, nq, ncomp, nb, ncomp, d))
    Dav = np.zeros((F, 2, nq, ncomp, nb, ncomp, d))
    for s, sgn in ((0, 1.0), (1, -1.0)):
        for c in range(ncomp):
            T[:, s, :, c, :, c, :] = sgn * space.fB[:, s, :, :, None] * n[:, None, None, :]
            Dav[:, s, :, c, :, c, :] = wav[:, None, None, None] * space.fG[:, s]
    shape = (F, 2, nq, ncomp * nb, ncomp, d)
    return T.reshape(shape), Dav.reshape(shape)


def _scatter(space, ncomp, vol_blocks, fac_blocks, col_ncomp=None):
    """Sum element blocks ``(E, n, m)`` and facet blocks ``(F, 2, 2, n, m)``
    (indexed ``[f, test side, trial side]``) into a CSR matrix."""
    E = space.n_elements
    n = ncomp * space.nb
    m = (col_ncomp or ncomp) * space.nb
    rloc = np.arange(n)
    cloc = np.arange(m)
    rows, cols, vals = [], [], []
    if vol_blocks is not None:
        rb = (np.arange(E) * n)[:, None] + rloc[None, :]
        cb = (np.arange(E) * m)[:, None] + cloc[None, :]
        rows.append(np.repeat(rb[:, :, None], m, axis=2).ravel())
        cols.append(np.repeat(cb[:, None, :], n, axis=1).ravel())
        vals.append(vol_blocks.ravel())
    if fac_blocks is not None:
        el = space.f_el
        for t in (0, 1):
            for s in (0, 1):
                ok = (el[:, t] >= 0) & (el[:, s] >= 0)
                if not ok.any():
                    continue
                rt = (el[ok, t] * n)[:, None] + rloc[None, :]
                cs = (el[ok, s] * m)[:, None] + cloc[None, :]
                rows.append(np.repeat(rt[:, :, None], m, axis=2).ravel())
                cols.append(np.repeat(cs[:, None, :], n, axis=1).ravel())
                vals.append(fac_blocks[ok, t, s].ravel())
    A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(E * n, E * m)).tocsr()
    A.sum_duplicates()
    return A


def assemble_gradient(space):
    """Discrete gradient ``G`` (scalar -> d-vector test rows) with
    ``(G u)[Xi] = int grad u . Xi - int_E [[u]] . {Xi}`` (interior facets only).

    By elementwise integration ``-G^T`` is the divergence
    ``int div(p) z - int_{E u dOmega} [[p]] {z}``.
    """
    d = space.dim
    vol = np.einsum("eq,eqi,eqjm->emij", space.W, space.B, space.G)
    E, nb = space.n_elements, space.nb
    vol = vol.reshape(E, d * nb, nb)
    sgn = np.array([1.0, -1.0])
    inner = (~space.bmask).astype(float)
    fac = -0.5 * np.einsum("f,fq,s,fm,ftqi,fsqj->ftsmij", inner, space.fW, sgn, space.fN,
                           space.fB, space.fB)
    fac = fac.reshape(len(inner), 2, 2, d * nb, nb)
    return _scatter(space, d, vol, fac, col_ncomp=1)


def _facet_penalty_weight(space, sigma, mask):
    return np.where(mask, sigma / space.fH, 0.0)


def assemble_laplacian(space, ncomp, sigma, boundary):
    """Frobenius SIP Laplacian for ``ncomp`` components; ``boundary`` adds
    boundary facets to the consistency and penalty terms."""
    D = _vol_features(space, ncomp)
    vol = -np.einsum("eq,eqmab,eqnab->emn", space.W, D, D)
    T, Dav = _facet_features(space, ncomp)
    use = np.ones(len(space.fW), bool) if boundary else ~space.bmask
    pen = _facet_penalty_weight(space, sigma, use)
    w = space.fW * use[:, None]
    # [f, t, s]: test side t, trial side s
    fac = (np.einsum("fq,ftqmab,fsqnab->ftsmn", w, Dav, T)
           + np.einsum("fq,ftqmab,fsqnab->ftsmn", w, T, Dav)
           - np.einsum("fq,f,ftqmab,fsqnab->ftsmn", w, pen, T, T))
    return _scatter(space, ncomp, vol, fac)


def assemble_ns_tensor(space, eta1, eta2, sigma, boundary_penalty=True):
    """Bulk/shear SIP discretisation of the Navier-Stokes tensor (d-vector)."""
    d = space.dim
    alpha = eta1 - 2.0 * eta2 / d
    D = _vol_features(space, d)
    divD = np.einsum("eqmaa->eqm", D)
    symD = D + np.swapaxes(D, -1, -2)
    vol = -(alpha * np.einsum("eq,eqm,eqn->emn", space.W, divD, divD)
            + eta2 * np.einsum("eq,eqmab,eqnab->emn", space.W, D, symD))
    T, Dav = _facet_features(space, d)
    trT = np.einsum("ftqmaa->ftqm", T)
    trD = np.einsum("ftqmaa->ftqm", Dav)
    symT = T + np.swapaxes(T, -1, -2)
    symDav = Dav + np.swapaxes(Dav, -1, -2)
    w = space.fW
    pmask = np.ones(len(w), bool) if boundary_penalty else ~space.bmask
    pen = _facet_penalty_weight(space, sigma, pmask)
    fac = (alpha * (np.einsum("fq,ftqm,fsqn->ftsmn", w, trD, trT)
                    + np.einsum("fq,ftqm,fsqn->ftsmn", w, trT, trD))
           + eta2 * (np.einsum("fq,ftqmab,fsqnab->ftsmn", w, Dav, symT)
                     + np.einsum("fq,ftqmab,fsqnab->ftsmn", w, T, symDav))
           - np.einsum("fq,f,ftqmab,fsqnab->ftsmn", w, pen, T, T))
    return _scatter(space, d, vol, fac)


class FormContext:
    """Penalty settings and cached form matrices on one space.

    ``facet_set`` controls the scalar form: ``"interior"`` (default, the
    A1 convention) or ``"all"`` (interior and boundary facets).
    """

    def __init__(self, space, sigma=None, facet_set="interior", ns_boundary_penalty=True):
        if facet_set not in ("interior", "all"):
            raise ValueError(f"facet_set must be 'interior' or 'all', got {facet_set!r}")
        self.space = space
        self.sigma = float(sigma) if sigma is not None else min_penalty(space)
        if self.sigma < min_penalty(space):
            warnings.warn(f"sigma={self.sigma} is below the default {min_penalty(space)}; "
                          "form matrices may be indefinite", stacklevel=2)
        self.facet_set = facet_set
        self.ns_boundary_penalty = ns_boundary_penalty
        self._cache = {}

    def h(self, facet):
        return float(self.space.fH[facet])

    def a1_matrix(self):
        if "a1" not in self._cache:
            self._cache["a1"] = assemble_laplacian(self.space, 1, self.sigma,
                                                   boundary=self.facet_set == "all")
        return self._cache["a1"]

    def a2_matrix(self):
        if "a2" not in self._cache:
            self._cache["a2"] = assemble_laplacian(self.space, self.space.dim, self.sigma, boundary=True)
        return self._cache["a2"]

    def a2_ns_matrix(self, params):
        key = ("a2ns", params.eta1, params.eta2)
        if key not in self._cache:
            self._cache[key] = assemble_ns_tensor(self.space, params.eta1, params.eta2, self.sigma,
                                                  boundary_penalty=self.ns_boundary_penalty)
        return self._cache[key]

    def viscous_matrix(self, params):
        """The matrix ``V`` whose negative enters the momentum residual:
        ``eta A2`` or the NS tensor form."""
        if params.viscosity == "ns":
            return self.a2_ns_matrix(params)
        return params.eta * self.a2_matrix()


def _check(ctx, u, w, ncomp):
    for f in (u, w):
        if f.space is not ctx.space:
            raise ShapeError("field lives on a different space")
        if f.ncomp != ncomp:
            raise ShapeError(f"expected a {ncomp}-component field, got {f.ncomp}")


def a1_scalar(ctx, a, chi):
    _check(ctx, a, chi, 1)
    return float(chi.vector @ (ctx.a1_matrix() @ a.vector))


def a2_vector(ctx, v, xi):
    _check(ctx, v, xi, ctx.space.dim)
    return float(xi.vector @ (ctx.a2_matrix() @ v.vector))


def a2_ns_tensor(ctx, params, v, xi):
    _check(ctx, v, xi, ctx.space.dim)
    return float(xi.vector @ (ctx.a2_ns_matrix(params) @ v.vector))


def max_eigenvalue(matrix):
    """Largest eigenvalue of a symmetric sparse matrix and its max-abs entry scale."""
    n = matrix.shape[0]
    scale = float(abs(matrix).max()) if matrix.nnz else 0.0
    if n <= 2000:
        ev = np.linalg.eigvalsh(matrix.toarray())
        return float(ev[-1]), scale
    ev = eigsh(matrix, k=1, which="LA", return_eigenvectors=False, tol=1e-10)
    return float(ev[0]), scale


def semidefiniteness_report(ctx, params=None):
    """Max eigenvalue of each assembled form; all should be ``<= 1e-10 * scale``."""
    out = {"a1": max_eigenvalue(ctx.a1_matrix()), "a2": max_eigenvalue(ctx.a2_matrix())}
    if params is not None and params.viscosity == "ns":
        out["a2_ns"] = max_eigenvalue(ctx.a2_ns_matrix(params))
    return out
