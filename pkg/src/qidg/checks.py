"""Built-in property suite (``qidg check``).

Each check builds a small case, measures one quantity and compares it to a
fixed limit. Everything here runs in well under a minute.
"""
import time
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .forms import FormContext
from .mesh import build_mesh
from .model import ModelParams, well_difference_quotient
from .scheme import TimeGrid, advance, get_operator, initial_state
from .space import DgSpace


@dataclass
class CheckResult:
    name: str
    value: float
    limit: float
    seconds: float = 0.0

    @property
    def passed(self):
        return bool(np.isfinite(self.value) and self.value <= self.limit)

    def line(self):
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag}  {self.name:<38s} {self.value:10.3e}  (limit {self.limit:.0e}, {self.seconds:.2f}s)"


def _spaces():
    return [DgSpace(build_mesh("interval(-1,1,7)"), 2),
            DgSpace(build_mesh("rectangle(0,1,0,1,3,3)"), 2),
            DgSpace(build_mesh("disk(1,2)"), 1)]


def _random_state_vector(op, rng, scale=0.3):
    """Random coefficients with phi kept well inside the density-positive range."""
    U = scale * rng.standard_normal(op.N)
    X = U.reshape(op.E, op.C, op.nb)
    X[:, 0, 1:] *= 0.2
    return X.ravel()


_FD_PARAMS = (
    ModelParams(),
    ModelParams(viscosity="ns", eta1=1e-3, eta2=5e-3, omega=1.0, g=(0.0, 0.01)),
    ModelParams(rho2=10.0, well="modified"),
)


def jacobian_fd(seed=0, directions=4, eps=1e-6):
    """Worst relative mismatch of ``J w`` against central differences."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for space in _spaces():
        for params in _FD_PARAMS:
            if space.dim == 1 and params.viscosity == "ns":
                continue
            op = get_operator(space, params)
            Uo = _random_state_vector(op, rng)
            Un = Uo + 0.05 * rng.standard_normal(op.N)
            k = 0.01
            J = op.jacobian(Uo, Un, k)
            for _ in range(directions):
                w = rng.standard_normal(op.N)
                fd = (op.residual(Uo, Un + eps * w, k) - op.residual(Uo, Un - eps * w, k)) / (2 * eps)
                Jw = J @ w
                worst = max(worst, float(np.linalg.norm(Jw - fd) / np.linalg.norm(Jw)))
    return worst


def form_symmetry():
    """Max ``|A - A^T|`` relative to the largest entry, over A1, A2 and the NS form."""
    worst = 0.0
    params = ModelParams(viscosity="ns", eta1=1e-3, eta2=5e-3)
    for space in _spaces():
        ctx = FormContext(space)
        mats = [ctx.a1_matrix(), ctx.a2_matrix()]
        if space.dim == 2:
            mats.append(ctx.a2_ns_matrix(params))
        for A in mats:
            worst = max(worst, float(abs(A - A.T).max() / abs(A).max()))
    return worst


def form_semidefiniteness():
    """Largest eigenvalue relative to the largest entry (should be <= 0)."""
    worst = -np.inf
    params = ModelParams(viscosity="ns", eta1=1e-3, eta2=5e-3)
    for space in _spaces():
        ctx = FormContext(space)
        mats = [ctx.a1_matrix(), ctx.a2_matrix()]
        if space.dim == 2:
            mats.append(ctx.a2_ns_matrix(params))
        for A in mats:
            ev = np.linalg.eigvalsh(A.toarray())
            worst = max(worst, float(ev[-1] / abs(A).max()))
    return max(worst, 0.0)


def elementwise_integration(seed=0):
    """``sum_K int div(p) z + p . grad z`` against the facet terms, relative."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for space in _spaces():
        d = space.dim
        data = rng.standard_normal((space.n_elements, d + 1, space.nb))
        vals, grads = space.eval_quad(data)
        p, z = vals[..., :d], vals[..., d]
        div = np.einsum("kqii->kq", grads[..., :d, :])
        gz = grads[..., d, :]
        vol_div = np.sum(space.W * div * z)
        vol_grad = np.sum(space.W * np.sum(p * gz, axis=-1))
        tr = space.eval_facets(data)                     # (F, 2, nq, C)
        n = space.fN[:, None, :]
        inner = ~space.bmask
        pn0 = np.sum(tr[:, 0, :, :d] * n, axis=-1)
        pn1 = np.sum(tr[:, 1, :, :d] * n, axis=-1)
        z0, z1 = tr[:, 0, :, d], tr[:, 1, :, d]
        jump_p = pn0 - pn1
        avg_z = 0.5 * (z0 + z1)
        # {p} . [[z]] on interior facets, p . n z on the boundary
        avg_p_jump_z = np.where(inner[:, None], 0.5 * (pn0 + pn1) * (z0 - z1), pn0 * z0)
        fac = (np.sum(space.fW[inner] * (jump_p * avg_z)[inner])
               + np.sum(space.fW * avg_p_jump_z))
        scale = abs(vol_div) + abs(vol_grad) + abs(fac)
        worst = max(worst, abs(vol_div + vol_grad - fac) / scale)
    return worst


def _exact_quotient(W, x, y):
    fx, fy = Fraction(float(x)), Fraction(float(y))
    return float((W(fy) - W(fx)) / (fy - fx))


def taylor_quotient(n=10_000, seed=0):
    """Max error of the well quotient against exact rational arithmetic."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.6, 1.6, n)
    y = rng.uniform(-1.6, 1.6, n)
    y[: n // 10] = x[: n // 10] + 1e-3 * rng.standard_normal(n // 10)
    worst = 0.0
    for params in (ModelParams(), ModelParams(rho2=10.0, well="modified")):
        A = Fraction(params.well_A or 0.0)

        def W(s):
            base = (s * s - 1) ** 2
            if A:
                base += 4 * A * (max(s - 1, 0) ** 2 + max(-1 - s, 0) ** 2)
            return base

        q = well_difference_quotient(params, x, y)
        ref = np.array([_exact_quotient(W, a, b) if a != b else np.nan for a, b in zip(x, y)])
        ok = np.isfinite(ref)
        worst = max(worst, float(np.max(np.abs(q[ok] - ref[ok]) / np.maximum(1.0, np.abs(ref[ok])))))
    return worst


def pure_phase_fixed_point(steps=10):
    """Max coefficient change of a pure-phase state over ``steps`` steps."""
    worst = 0.0
    for space in _spaces()[:2]:
        params = ModelParams()
        s0 = initial_state(space, params, "pure-phase")
        traj = advance(params, s0, TimeGrid.uniform(steps * 0.01, steps))
        worst = max(worst, float(np.max(np.abs(traj[-1].to_vector() - s0.to_vector()))))
    return worst


def skew_symmetry(seed=0):
    """Convective terms tested with ``v`` itself, relative to the viscous part.

    ``s -> v . R_v(s v)`` has a linear (viscous) and a quadratic (convective)
    part in ``s``; the quadratic coefficient must vanish identically.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for space in _spaces():
        op = get_operator(space, ModelParams())
        L = op.L
        X = np.zeros((op.E, op.C, op.nb))
        X[:, L.PHI] = 0.3 * rng.standard_normal((op.E, op.nb))
        X[:, L.V] = rng.standard_normal((op.E, len(L.V), op.nb))
        vrows = np.zeros((op.E, op.C, op.nb), bool)
        vrows[:, L.V] = True
        vrows = vrows.ravel()
        U = X.ravel()

        def f(s):
            Us = U.copy()
            Us[vrows] *= s
            return U[vrows] @ op.residual(Us, Us, 1.0)[vrows]

        even = 0.5 * (f(1.0) + f(-1.0))
        odd = 0.5 * (f(1.0) - f(-1.0))
        worst = max(worst, abs(even) / max(abs(odd), 1.0))
    return worst


CHECKS = (
    ("jacobian vs finite differences", jacobian_fd, 1e-6),
    ("form symmetry (A1, A2, NS)", form_symmetry, 1e-12),
    ("form negative semidefiniteness", form_semidefiniteness, 1e-10),
    ("elementwise integration identity", elementwise_integration, 1e-11),
    ("well quotient exactness (1e4 pairs)", taylor_quotient, 1e-10),
    ("pure-phase fixed point (10 steps)", pure_phase_fixed_point, 1e-12),
    ("convective skew-symmetry", skew_symmetry, 1e-12),
)


def run_checks(log=print):
    results = []
    for name, fn, limit in CHECKS:
        t0 = time.perf_counter()
        try:
            value = float(fn())
        except Exception as exc:  # a crashing check is a failing check
            value = float("nan")
            if log:
                log(f"  {name}: {type(exc).__name__}: {exc}")
        res = CheckResult(name, value, limit, time.perf_counter() - t0)
        if log:
            log(res.line())
        results.append(res)
    return results
