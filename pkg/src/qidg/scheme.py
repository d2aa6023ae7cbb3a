"""The fully discrete six-field scheme: residual, Jacobian, Newton, time marching.

Unknowns per element are ordered ``[phi, v_1..v_d, lam, a, b, q_1..q_d]``,
each with ``nb`` modal coefficients; the global vector is element-major.
Rows of the phase, momentum and constraint equations are multiplied by the
timestep ``k`` so that all residual rows have comparable size (this does
not change the roots).

Boundary treatment on genuinely discontinuous spaces:

* ``v = 0`` weakly through the boundary facet terms of the viscous form;
* the phase flux ``[[phi v]]``, the constraint flux ``[[(c-/c+) phi v - v]]``
  and the capillary flux ``[[q]]`` are integrated over interior *and*
  boundary facets, the ``q``-equation's ``[[phi]]`` term over interior facets
  only. With this pairing the discrete divergence is minus the adjoint of
  the discrete gradient, which is what makes mass conservation and the
  energy equality exact;
* the body-force potential ``psi = omega^2 |x|^2 / 2 - g . x`` is projected
  into the space and enters as a DG gradient, ``-rho grad psi_h`` plus
  interior facet jumps.
"""
import math
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, gmres, splu

from . import kernels
from .errors import (NonconvergenceError, NonFiniteResidualError,
                     ShapeError, SingularSystemError, UnsupportedDimensionError)
from .forms import FormContext, assemble_gradient
from .integrands import Layout, facet_terms, volume_terms
from .model import density_of_phase, exact_steady_profile, well_eval
from .space import FieldCoeffs, l2_project, random_vertex_field


# ---------------------------------------------------------------------------- state
@dataclass
class State:
    phi: FieldCoeffs
    v: FieldCoeffs
    lam: FieldCoeffs
    a: FieldCoeffs
    b: FieldCoeffs
    q: FieldCoeffs
    t: float = 0.0
    step: int = 0

    def __post_init__(self):
        space = self.phi.space
        d = space.dim
        for name, nc in (("phi", 1), ("v", d), ("lam", 1), ("a", 1), ("b", 1), ("q", d)):
            f = getattr(self, name)
            if f.space is not space:
                raise ShapeError(f"field {name} lives on a different space")
            if f.ncomp != nc:
                raise ShapeError(f"field {name} must have {nc} components, got {f.ncomp}")

    @property
    def space(self):
        return self.phi.space

    def to_vector(self):
        """Monolithic coefficient vector in element-major order."""
        parts = [self.phi.data, self.v.data, self.lam.data, self.a.data, self.b.data, self.q.data]
        return np.concatenate(parts, axis=1).reshape(-1)

    @classmethod
    def from_vector(cls, space, U, t=0.0, step=0):
        d = space.dim
        X = np.asarray(U, dtype=float).reshape(space.n_elements, 2 * d + 4, space.nb)

        def fc(lo, hi):
            return FieldCoeffs(space, hi - lo, X[:, lo:hi].copy())

        return cls(fc(0, 1), fc(1, 1 + d), fc(d + 1, d + 2), fc(d + 2, d + 3),
                   fc(d + 3, d + 4), fc(d + 4, 2 * d + 4), t, step)

    def copy(self):
        return State.from_vector(self.space, self.to_vector(), self.t, self.step)


@dataclass(frozen=True)
class TimeGrid:
    times: tuple

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or len(t) < 1:
            raise ValueError("time grid needs at least one time")
        if np.any(np.diff(t) <= 0):
            raise ValueError("time grid must be strictly increasing")
        object.__setattr__(self, "times", tuple(float(x) for x in t))

    @classmethod
    def uniform(cls, T, steps, t0=0.0):
        steps = int(steps)
        if steps < 0:
            raise ValueError("number of steps must be non-negative")
        if steps == 0:
            return cls((t0,))
        return cls(tuple(t0 + (T - t0) * np.arange(steps + 1) / steps))

    @classmethod
    def fixed_step(cls, k, T, t0=0.0):
        """Steps of exactly ``k`` covering ``[t0, T]``; the last time may pass ``T``
        by less than one step."""
        if not k > 0:
            raise ValueError("timestep must be positive")
        steps = max(0, math.ceil((T - t0) / k - 1e-9))
        return cls(tuple(t0 + k * np.arange(steps + 1)))

    @property
    def n_steps(self):
        return len(self.times) - 1

    def k(self, n):
        return self.times[n + 1] - self.times[n]


@dataclass
class NewtonSettings:
    """Newton controls.

    ``linear_solver="direct"`` factorises the exact Jacobian at every
    iteration. ``"krylov"`` assembles the exact Jacobian but solves with
    GMRES preconditioned by the most recent LU factors, which are kept
    across iterations and timesteps and only rebuilt when GMRES misses
    ``krylov_rtol`` within ``krylov_maxiter`` iterations. The stopping test
    is the same residual tolerance either way.
    """
    tol: float = 1e-10
    max_iter: int = 25
    max_halvings: int = 10
    linear_solver: str = "direct"
    krylov_rtol: float = 1e-8
    krylov_maxiter: int = 40
    verbose: bool = False

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("Newton tolerance must be positive")
        if self.max_iter < 0 or self.max_halvings < 0:
            raise ValueError("iteration limits must be non-negative")
        if self.linear_solver not in ("direct", "krylov"):
            raise ValueError(f"linear_solver must be 'direct' or 'krylov', got {self.linear_solver!r}")
        if not 0 < self.krylov_rtol < 1 or self.krylov_maxiter < 1:
            raise ValueError("krylov_rtol must lie in (0, 1) and krylov_maxiter be >= 1")


@dataclass
class NewtonReport:
    iterations: int
    residuals: list
    halvings: list
    seconds: float
    factorizations: int = 0
    krylov_iterations: int = 0


class LinearSolver:
    """Sparse LU of the Jacobian, optionally kept as a preconditioner.

    ``row_order`` (from :meth:`SchemeOperator.pivot_row_order`) moves a
    nonzero onto every diagonal position so that a symmetric fill-reducing
    ordering with weak threshold pivoting can be used; the multiplier rows
    have no diagonal entry of their own. Without it, COLAMD with partial
    pivoting is used.
    """

    def __init__(self, pivot_threshold=0.01):
        self.pivot_threshold = pivot_threshold
        self.lu = None
        self.perm = None
        self.key = None
        self.factorizations = 0
        self.krylov_iterations = 0

    def factor(self, J, key=None, row_order=None):
        try:
            if row_order is not None:
                self.perm = row_order
                self.lu = splu(J.tocsr()[row_order].tocsc(), permc_spec="MMD_AT_PLUS_A",
                               diag_pivot_thresh=self.pivot_threshold,
                               options=dict(SymmetricMode=True))
            else:
                self.perm = None
                self.lu = splu(J.tocsc(), permc_spec="COLAMD")
        except RuntimeError as exc:
            self.lu = None
            raise SingularSystemError(f"sparse factorisation failed: {exc}") from exc
        self.key = key
        self.factorizations += 1

    def valid_for(self, key):
        # key = (operator id, timestep); grid steps differ in the last bits
        if self.lu is None or self.key is None or self.key[0] != key[0]:
            return False
        return abs(self.key[1] - key[1]) <= 1e-9 * abs(key[1])

    def drop(self):
        self.lu = None

    def solve(self, r):
        x = self.lu.solve(r if self.perm is None else r[self.perm])
        if not np.all(np.isfinite(x)):
            raise SingularSystemError("linear solve produced non-finite values")
        return x

    def krylov_solve(self, J, r, rtol, maxiter):
        """GMRES on ``J x = r`` preconditioned by the stored factors; ``None``
        if it does not converge."""
        count = [0]

        def prec(y):
            count[0] += 1
            return self.lu.solve(y if self.perm is None else y[self.perm])

        M = LinearOperator(J.shape, matvec=prec, dtype=float)
        # a few restart cycles: the inner loop stops on the preconditioned
        # residual, which can sit just above the true one
        restart = min(maxiter, 20)
        x, info = gmres(J, r, M=M, rtol=rtol, atol=0.0, restart=restart,
                        maxiter=max(1, -(-maxiter // restart)))
        self.krylov_iterations += count[0]
        if info != 0 or not np.all(np.isfinite(x)):
            return None
        return x


# ---------------------------------------------------------------------- operator
class SchemeOperator:
    """Residual and Jacobian of one step on a fixed space and parameter set.

    Everything state-independent is built once: the linear operators, the
    potential, and a fixed CSR sparsity pattern with scatter maps for the
    nonlinear volume and facet contributions.
    """

    def __init__(self, space, params, pin_lambda=None):
        if space.dim == 1 and params.omega:
            raise UnsupportedDimensionError("rotating frames need d = 2")
        self.space = space
        self.params = params
        d = space.dim
        self.L = L = Layout(d)
        self.C = L.C
        self.nb = space.nb
        self.E = space.n_elements
        self.N = self.E * self.C * self.nb
        self.pin = (params.c_minus == 0.0) if pin_lambda is None else bool(pin_lambda)
        self._row_order = None
        self.ctx = FormContext(space, sigma=params.sigma)

        self.Phi = np.ascontiguousarray(np.concatenate([space.B[..., None], space.G], axis=-1))
        self.interior = ~space.bmask
        self._build_potential()
        self._build_linear()
        self._build_pattern()
        sc = np.ones(self.C)
        sc[[L.PHI, *L.V, L.LAM]] = 0.0
        # per-row flag: 0 => scaled by k, 1 => unscaled
        self._row_unscaled = np.tile(np.repeat(sc, self.nb), self.E)

    # -- index helpers -----------------------------------------------------------------
    def gidx(self, e, c, i):
        return (np.asarray(e) * self.C + c) * self.nb + np.asarray(i)

    def _embed(self, M, row_off, row_nc, col_off, col_nc):
        M = M.tocoo()
        nb = self.nb

        def remap(idx, off, nc):
            e, rest = np.divmod(idx, nc * nb)
            c, i = np.divmod(rest, nb)
            return self.gidx(e, off + c, i)

        return sp.coo_matrix((M.data, (remap(M.row, row_off, row_nc), remap(M.col, col_off, col_nc))),
                             shape=(self.N, self.N))

    def _identity(self, row_c, col_c, coef=1.0):
        e = np.repeat(np.arange(self.E), self.nb)
        i = np.tile(np.arange(self.nb), self.E)
        return sp.coo_matrix((np.full(len(e), coef), (self.gidx(e, row_c, i), self.gidx(e, col_c, i))),
                             shape=(self.N, self.N))

    # -- construction ------------------------------------------------------------------
    def _build_potential(self):
        space, P = self.space, self.params
        d = space.dim
        g = np.zeros(d)
        g[:min(d, len(P.g))] = P.g[:d]
        self.g_vec = g
        om2 = P.omega ** 2

        def psi(x):
            return 0.5 * om2 * np.einsum("...i,...i->...", x, x) - x @ g

        self.psi_fun = psi
        self.psi_h = l2_project(space, psi)
        _, gp = space.eval_quad(self.psi_h.data)
        self.gpsi = gp[:, :, 0, :]
        self.psi_tr = space.eval_facets(self.psi_h.data)[..., 0]

    def _build_linear(self):
        space, P, L = self.space, self.params, self.L
        cp, cm = P.c_plus, P.c_minus
        d = space.dim
        A1 = self.ctx.a1_matrix()
        V = self.ctx.viscous_matrix(P)
        G = assemble_gradient(space)
        Dv = -G.T
        self.grad_op = G
        self.div_op = Dv.tocsr()
        v0, q0 = L.V[0], L.Q[0]
        mid = [
            self._identity(L.PHI, L.A, cp * P.m_r),
            self._embed(-cp * P.m_j * A1, L.PHI, 1, L.A, 1),
            self._embed(-V, v0, d, v0, d),
            self._embed(G, v0, d, L.B, 1),
            self._embed(Dv, L.LAM, 1, v0, d),
            self._identity(L.A, L.A),
            self._identity(L.A, L.LAM, -cm),
            self._embed(cp * P.gamma * Dv, L.A, 1, q0, d),
            self._identity(L.B, L.B),
            self._identity(L.B, L.LAM, -1.0),
            self._embed(-G, q0, d, L.PHI, 1),
        ] + [self._identity(c, c) for c in L.Q]
        self.M_mid = sp.csr_matrix(sum(m.tocsr() for m in mid))
        self.M_dt = (self._identity(L.PHI, L.PHI) + self._identity(L.LAM, L.PHI, -cm / cp)).tocsr()

    def _nonlinear_index_maps(self):
        space, L, nb = self.space, self.L, self.nb
        E = self.E
        ii, jj = np.meshgrid(np.arange(nb), np.arange(nb), indexing="ij")
        e = np.arange(E)[:, None, None]
        vol_rows, vol_cols = [], []
        for r, c in L.vol_pairs():
            vol_rows.append(np.broadcast_to(self.gidx(e, r, ii[None]), (E, nb, nb)).ravel())
            vol_cols.append(np.broadcast_to(self.gidx(e, c, jj[None]), (E, nb, nb)).ravel())
        el = space.f_el
        F = len(el)
        fac_rows, fac_cols = [], []
        et = el[:, :, None, None, None]          # test side index in axis 1
        es = el[:, None, :, None, None]          # trial side index in axis 2
        valid = np.broadcast_to((et >= 0) & (es >= 0), (F, 2, 2, nb, nb))
        for r, c in L.fac_pairs():
            rr = np.broadcast_to(self.gidx(np.maximum(et, 0), r, ii[None, None, None]), (F, 2, 2, nb, nb))
            cc = np.broadcast_to(self.gidx(np.maximum(es, 0), c, jj[None, None, None]), (F, 2, 2, nb, nb))
            fac_rows.append(np.where(valid, rr, -1).ravel())
            fac_cols.append(np.where(valid, cc, -1).ravel())
        return (np.concatenate(vol_rows), np.concatenate(vol_cols),
                np.concatenate(fac_rows), np.concatenate(fac_cols))

    def _build_pattern(self):
        N = self.N
        vr, vc, fr, fc = self._nonlinear_index_maps()
        mid = self.M_mid.tocoo()
        dt = self.M_dt.tocoo()
        rows = [vr, fr[fr >= 0], mid.row, dt.row]
        cols = [vc, fc[fc >= 0], mid.col, dt.col]
        if self.pin:
            self.pin_row = int(self.gidx(0, self.L.LAM, 0))
            e = np.arange(self.E)
            self.pin_cols = self.gidx(e, self.L.LAM, 0)
            self.pin_vals = np.sqrt(self.space.mesh.volume)
            rows.append(np.full(self.E, self.pin_row))
            cols.append(self.pin_cols)
        keys = np.unique(np.concatenate(rows).astype(np.int64) * N + np.concatenate(cols))
        prow, pcol = np.divmod(keys, N)
        self.nnz = len(keys)
        self.indices = pcol.astype(np.int32 if N < 2 ** 31 else np.int64)
        self.indptr = np.concatenate([[0], np.cumsum(np.bincount(prow, minlength=N))])
        self.pattern_rows = prow

        def locate(r, c):
            pos = np.searchsorted(keys, r.astype(np.int64) * N + c)
            return pos

        self.pos_vol = locate(vr, vc)
        fpos = locate(np.maximum(fr, 0), np.maximum(fc, 0))
        self.pos_fac = np.where(fr >= 0, fpos, self.nnz)
        self.pos_mid = locate(mid.row, mid.col)
        self.mid_data = mid.data
        self.pos_dt = locate(dt.row, dt.col)
        self.dt_data = dt.data
        if self.pin:
            lo, hi = self.indptr[self.pin_row], self.indptr[self.pin_row + 1]
            self.pin_slice = slice(lo, hi)
            self.pin_pos = locate(np.full(self.E, self.pin_row), self.pin_cols)
        # residual scatter for facet contributions (F, 2, C, nb)
        el = self.space.f_el
        e = np.maximum(el, 0)[:, :, None, None]
        c = np.arange(self.C)[None, None, :, None]
        i = np.arange(self.nb)[None, None, None, :]
        pos = self.gidx(e, c, i)
        self.fres_pos = np.where((el >= 0)[:, :, None, None], pos, self.N).ravel()

    # -- evaluation --------------------------------------------------------------------
    def _fields(self, Uo, Un):
        sp_ = self.space
        E, C, nb = self.E, self.C, self.nb
        Xo = Uo.reshape(E, C, nb)
        Xn = Un.reshape(E, C, nb)
        Xm = 0.5 * (Xo + Xn)
        vo = np.einsum("eci,eqi->eqc", Xo, sp_.B)
        vn = np.einsum("eci,eqi->eqc", Xn, sp_.B)
        vm, gm = sp_.eval_quad(Xm)
        tm = sp_.eval_facets(Xm)
        return Xm, vo, vn, vm, gm, tm

    def _row_scale(self, k):
        return self._row_unscaled + (1.0 - self._row_unscaled) * k

    def residual(self, Uo, Un, k):
        if not k > 0:
            raise ValueError("timestep must be positive")
        Uo = np.asarray(Uo, dtype=float)
        Un = np.asarray(Un, dtype=float)
        if Uo.shape != (self.N,) or Un.shape != (self.N,):
            raise ShapeError(f"state vectors must have length {self.N}")
        Xm, vo, vn, vm, gm, tm = self._fields(Uo, Un)
        sp_ = self.space
        fr, _ = volume_terms(self.params, self.L, k, vo, vn, vm, gm, self.gpsi, jacobian=False)
        R = kernels.vol_residual(sp_.W, self.Phi, fr).ravel()
        hr, _ = facet_terms(self.params, self.L, tm, sp_.fN, self.interior, self.psi_tr, jacobian=False)
        Rf = kernels.fac_residual(sp_.fW, sp_.fB, hr)
        R = R + kernels.scatter_add(self.N, self.fres_pos, Rf.ravel())
        R = R + self.M_mid @ Xm.ravel() + self.M_dt @ ((Un - Uo) / k)
        R *= self._row_scale(k)
        if self.pin:
            R[self.pin_row] = self.pin_vals @ Un[self.pin_cols]
        if not np.all(np.isfinite(R)):
            raise NonFiniteResidualError("residual contains NaN or Inf")
        return R

    def jacobian(self, Uo, Un, k):
        Uo = np.asarray(Uo, dtype=float)
        Un = np.asarray(Un, dtype=float)
        Xm, vo, vn, vm, gm, tm = self._fields(Uo, Un)
        sp_ = self.space
        _, Jv = volume_terms(self.params, self.L, k, vo, vn, vm, gm, self.gpsi)
        _, Jf = facet_terms(self.params, self.L, tm, sp_.fN, self.interior, self.psi_tr)
        vals = [kernels.vol_blocks(sp_.W, self.Phi, Jv[pair]).ravel() for pair in self.L.vol_pairs()]
        fvals = [kernels.fac_blocks(sp_.fW, sp_.fB, Jf[pair]).ravel() for pair in self.L.fac_pairs()]
        pos = np.concatenate([self.pos_vol, self.pos_fac, self.pos_mid, self.pos_dt])
        allv = np.concatenate(vals + fvals + [0.5 * self.mid_data, self.dt_data / k])
        data = kernels.scatter_add(self.nnz, pos, allv)
        data *= self._row_scale(k)[self.pattern_rows]
        if self.pin:
            data[self.pin_slice] = 0.0
            data[self.pin_pos] = self.pin_vals
        if not np.all(np.isfinite(data)):
            raise NonFiniteResidualError("Jacobian contains NaN or Inf")
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.N, self.N))

    def pivot_row_order(self):
        """Per-element cyclic row order (phi -> a -> lam -> phi slots).

        The lam rows carry ``-(c-/c+)`` on phi and the a rows ``-c-/2`` on
        lam, so after the cycle every diagonal entry is bounded away from
        zero. Returns ``None`` when ``c- = 0`` or the multiplier is pinned.
        """
        if self.params.c_minus == 0.0 or self.pin:
            return None
        if self._row_order is None:
            L = self.L
            src = np.arange(self.C)
            src[L.A], src[L.LAM], src[L.PHI] = L.PHI, L.A, L.LAM
            idx = np.arange(self.N).reshape(self.E, self.C, self.nb)
            self._row_order = idx[:, src, :].ravel()
        return self._row_order


_OPERATORS = {}


def get_operator(space, params, pin_lambda=None):
    """Cached :class:`SchemeOperator` for ``(space, params, pin)``."""
    key = (id(space), params, pin_lambda)
    op = _OPERATORS.get(key)
    if op is None or op.space is not space:
        if len(_OPERATORS) > 8:
            _OPERATORS.clear()
        op = SchemeOperator(space, params, pin_lambda)
        _OPERATORS[key] = op
    return op


def _check_pair(state_old, state_new):
    if state_old.space is not state_new.space:
        raise ShapeError("states live on different spaces")


def assemble_residual(params, state_old, state_new, k_n, pin_lambda=None):
    """Residual of the fully discrete scheme (rows of the phase, momentum and
    constraint equations scaled by ``k_n``)."""
    _check_pair(state_old, state_new)
    op = get_operator(state_old.space, params, pin_lambda)
    return op.residual(state_old.to_vector(), state_new.to_vector(), k_n)


def assemble_jacobian(params, state_old, state_new, k_n, pin_lambda=None):
    """Derivative of :func:`assemble_residual` in the new-level coefficients (CSR)."""
    _check_pair(state_old, state_new)
    op = get_operator(state_old.space, params, pin_lambda)
    return op.jacobian(state_old.to_vector(), state_new.to_vector(), k_n)


# ---------------------------------------------------------------------------- Newton
def newton_solve(params, state_old, k_n, settings=None, pin_lambda=None, guess=None, report=None,
                 solver=None):
    """Solve one step by damped Newton from ``guess`` (default: the old state).

    Stops when the max-norm of the residual is at most ``settings.tol``;
    a full step is halved while it increases the residual norm.
    """
    settings = settings or NewtonSettings()
    krylov = settings.linear_solver == "krylov"
    space = state_old.space
    op = get_operator(space, params, pin_lambda)
    if solver is None:
        solver = LinearSolver(0.0 if krylov else 0.01)
    key = (id(op), float(k_n))
    nfac0, nkry0 = solver.factorizations, solver.krylov_iterations
    Uo = state_old.to_vector()
    U = (guess.to_vector() if guess is not None else Uo).copy()
    t0 = time.perf_counter()
    r = op.residual(Uo, U, k_n)
    rn = float(np.max(np.abs(r)))
    history, halvings = [rn], []
    it = 0
    while rn > settings.tol:
        if it >= settings.max_iter:
            raise NonconvergenceError(
                f"Newton did not reach {settings.tol:g} in {settings.max_iter} iterations "
                f"(last residual {rn:.3e})", residual=rn, history=history)
        J = op.jacobian(Uo, U, k_n)
        dU = None
        if krylov and solver.valid_for(key):
            dU = solver.krylov_solve(J, -r, settings.krylov_rtol, settings.krylov_maxiter)
        if dU is None:
            solver.factor(J, key, op.pivot_row_order())
            dU = (solver.krylov_solve(J, -r, settings.krylov_rtol, settings.krylov_maxiter)
                  if krylov else None)
            if dU is None:
                dU = solver.solve(-r)
        alpha, nh = 1.0, 0
        while True:
            trial = U + alpha * dU
            try:
                rt = op.residual(Uo, trial, k_n)
                rtn = float(np.max(np.abs(rt)))
            except NonFiniteResidualError:
                rtn = math.inf
            if rtn <= rn or nh >= settings.max_halvings:
                break
            alpha *= 0.5
            nh += 1
        if not math.isfinite(rtn):
            raise NonFiniteResidualError("Newton iterate became non-finite")
        U, r, rn = trial, rt, rtn
        it += 1
        history.append(rn)
        halvings.append(nh)
        if settings.verbose:
            print(f"  newton {it}: |r| = {rn:.3e} (halvings {nh})")
    if not krylov:
        solver.drop()
    if report is not None:
        report.append(NewtonReport(it, history, halvings, time.perf_counter() - t0,
                                   solver.factorizations - nfac0,
                                   solver.krylov_iterations - nkry0))
    return State.from_vector(space, U, state_old.t + k_n, state_old.step + 1)


def advance(params, state, grid, settings=None, hooks=(), pin_lambda=None, keep=True):
    """March over ``grid``; ``hooks`` are called as ``hook(n, old, new, k, report)``
    after every step. Returns the list of states (only the last one unless
    ``keep``)."""
    settings = settings or NewtonSettings()
    solver = LinearSolver(0.0 if settings.linear_solver == "krylov" else 0.01)
    traj = [state]
    cur = state
    for n in range(grid.n_steps):
        k = grid.k(n)
        rep = []
        try:
            new = newton_solve(params, cur, k, settings, pin_lambda, report=rep, solver=solver)
        except NonconvergenceError as exc:
            exc.step = n + 1
            raise
        new.t = grid.times[n + 1]
        for hook in hooks:
            hook(n, cur, new, k, rep[0] if rep else None)
        if keep:
            traj.append(new)
        else:
            traj = [new]
        cur = new
    return traj


# --------------------------------------------------------------------------- forcing
def body_force_contribution(params, x, rho, v):
    """Body-force density ``-rho W x (W x x) - 2 rho W x v - rho g``.

    ``W = (0, 0, omega)`` and planar vectors are embedded as ``(v; 0)``. The
    gravity vector ``g`` is the one appearing as ``+rho g . Xi`` in the
    momentum residual, so the physical acceleration is ``-g``.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    d = x.shape[-1]
    if params.omega and d != 2:
        raise UnsupportedDimensionError("rotating frames need d = 2")
    g = np.zeros(d)
    g[:min(d, len(params.g))] = params.g[:d]
    f = -rho * g
    if params.omega:
        Om = np.array([0.0, 0.0, params.omega])
        x3 = np.append(x, 0.0)
        v3 = np.append(v, 0.0)
        f3 = -rho * np.cross(Om, np.cross(Om, x3)) - 2.0 * rho * np.cross(Om, v3)
        f = f + f3[:2]
    return f


# ------------------------------------------------------------------ initial states
CASES = ("steady-tanh", "steady-tanh-discrete", "random", "bubbles", "rotating-bubble",
         "rayleigh-taylor", "pure-phase")


def _indicator_phase(x, discs):
    """-1 inside any of the discs ``(cx, cy, r)``, +1 elsewhere."""
    inside = np.zeros(x.shape[:-1], bool)
    for cx, cy, r in discs:
        inside |= (x[..., 0] - cx) ** 2 + (x[..., 1] - cy) ** 2 <= r * r
    return np.where(inside, -1.0, 1.0)


BUBBLES = ((0.25, 0.25, 0.05), (0.25, 0.75, 0.01), (0.75, 0.25, 0.01), (0.75, 0.75, 0.01))


def initial_state(space, params, case, seed=0, amplitude=0.01, pin_lambda=None):
    """Initial data for a named case with consistently initialised auxiliaries."""
    d = space.dim
    zero_v = FieldCoeffs(space, d)
    if case in ("steady-tanh", "steady-tanh-discrete"):
        phi = l2_project(space, lambda x: exact_steady_profile(params, x[..., 0]))
        if case == "steady-tanh-discrete":
            phi = discrete_equilibrium(space, params, phi)
        v = zero_v
    elif case == "random":
        phi = random_vertex_field(space, seed, amplitude)
        v = zero_v
    elif case == "pure-phase":
        phi = l2_project(space, lambda x: np.ones(x.shape[:-1]))
        v = zero_v
    elif case in ("bubbles", "rotating-bubble", "rayleigh-taylor"):
        if d != 2:
            raise UnsupportedDimensionError(f"case {case!r} is two-dimensional")
        if case == "bubbles":
            phi = l2_project(space, lambda x: _indicator_phase(x, BUBBLES))
            v = zero_v
        elif case == "rotating-bubble":
            phi = l2_project(space, lambda x: _indicator_phase(x, [(-0.1, -0.1, 0.1)]))
            v = zero_v
        else:
            phi = l2_project(space, lambda x: np.where(x[..., 1] <= 0.0, 1.0, -1.0))

            def vel(x):
                w = (1 + np.cos(np.pi * x[..., 0])) * (1 + np.cos(np.pi * x[..., 1] / 2)) / 4
                return np.stack([np.zeros_like(w), w], axis=-1)

            v = l2_project(space, vel)
    else:
        raise ValueError(f"unknown case {case!r}; expected one of {', '.join(CASES)}")
    return consistent_state(space, params, phi, v, pin_lambda=pin_lambda)


def discrete_equilibrium(space, params, phi, tol=1e-13, max_iter=50):
    """Phase field of the discrete steady state near ``phi`` (zero velocity).

    Solves ``P W'(phi_h) + gamma G^T G phi_h = L`` for ``phi_h`` and a
    constant ``L`` with ``int phi_h`` fixed (when ``c- != 0``; otherwise
    ``L = 0``). The completed state is a fixed point of the scheme.
    """
    from scipy.sparse.linalg import spsolve

    op = get_operator(space, params)
    G = op.grad_op
    K = (params.gamma * (G.T @ G)).tocsr()
    one = l2_project(space, lambda x: np.ones(x.shape[:-1])).vector
    U = phi.vector.copy()
    mass0 = one @ U
    border = params.c_minus != 0.0
    n = len(U)
    lam = 0.0
    for _ in range(max_iter):
        vals, _ = space.eval_quad(U.reshape(space.n_elements, 1, space.nb))
        _, dW, d3W = well_eval(params, vals[..., 0])
        dW_h = np.einsum("eq,eq,eqi->ei", space.W, dW, space.B).ravel()
        r = dW_h + K @ U - lam * one
        # W'' of the quartic part: 12 phi^2 - 4; the modified well adds 8A off [-1, 1]
        ph = vals[..., 0]
        d2W = 12.0 * ph * ph - 4.0
        if params.well_A:
            d2W = d2W + 8.0 * params.well_A * ((ph > 1.0) | (ph < -1.0))
        blocks = np.einsum("eq,eq,eqi,eqj->eij", space.W, d2W, space.B, space.B)
        J = sp.block_diag(list(blocks), format="csr") + K
        if border:
            res = np.concatenate([r, [one @ U - mass0]])
            Jb = sp.bmat([[J, -one[:, None]], [one[None, :], None]], format="csc")
        else:
            res, Jb = r, J.tocsc()
        if np.max(np.abs(res)) <= tol:
            break
        step = spsolve(Jb, -res)
        U = U + step[:n]
        if border:
            lam += step[n]
    else:
        raise NonconvergenceError("discrete equilibrium did not converge",
                                  residual=float(np.max(np.abs(res))))
    return FieldCoeffs(space, 1, U)


def consistent_state(space, params, phi, v, t=0.0, pin_lambda=None):
    """Complete ``(phi, v)`` to a six-field state.

    ``q`` is the discrete gradient of ``phi``; ``a`` solves the
    constraint equation with ``d phi / dt`` eliminated through the phase
    equation; ``lam`` follows from the ``a``-equation with ``W'(phi)``
    projected, and ``b`` from the algebraic ``b``-equation.
    """
    from scipy.sparse.linalg import spsolve

    op = get_operator(space, params, pin_lambda)
    P = params
    cp, cm = P.c_plus, P.c_minus
    nb, E, d = space.nb, space.n_elements, space.dim
    q = FieldCoeffs(space, d, op.grad_op @ phi.vector)
    divq = op.div_op @ q.vector
    vals, _ = space.eval_quad(phi.data)
    dW = well_eval(P, vals[..., 0])[1]
    dW_h = np.einsum("eq,eq,eqi->ei", space.W, dW, space.B).ravel()
    divv = op.div_op @ v.vector
    if cm != 0.0:
        A1 = op.ctx.a1_matrix()
        n = E * nb
        M = (cm * P.m_r * sp.identity(n) - cm * P.m_j * A1).tocsc()
        a = spsolve(M, -divv) if np.any(divv) else np.zeros(n)
        lam = (a - cp * dW_h + cp * P.gamma * divq) / cm
    else:
        lam = np.zeros(E * nb)
        a = cp * dW_h - cp * P.gamma * divq
    vq, _ = space.eval_quad(v.data)
    v2 = np.einsum("eqc,eqc->eq", vq, vq)
    v2_h = np.einsum("eq,eq,eqi->ei", space.W, v2, space.B).ravel()
    b = lam + (P.rho1 + P.rho2) / 4.0 * v2_h
    return State(phi, v, FieldCoeffs(space, 1, lam), FieldCoeffs(space, 1, a),
                 FieldCoeffs(space, 1, b), q, t, 0)


def density_at_quadrature(params, state):
    vals, _ = state.space.eval_quad(state.phi.data)
    return density_of_phase(params, vals[..., 0])
