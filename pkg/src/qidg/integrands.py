"""Pointwise nonlinear integrands of the fully discrete scheme and their
derivatives with respect to the new time level.

Component order of the monolithic unknown is ``[phi, v_1..v_d, lam, a, b,
q_1..q_d]``; residual row ``c`` is tested against basis functions of
component ``c``. Linear constant-coefficient terms live in sparse matrices
(see :mod:`qidg.scheme`); only the remaining terms are produced here.

Volume residual coefficients ``fr[e, q, c, kind]`` multiply the test value
(kind 0) or test gradient component ``kind - 1``. Volume Jacobian entries
are keyed by ``(row component, column component)`` with coefficient arrays
``(E, nq, K, K)`` over ``(test kind, trial kind)``. Facet entries are values
only: residual ``hr[f, side, q, c]`` and Jacobian ``(F, nq, 2, 2)`` over
``(test side, trial side)``.

Midpoint quantities depend on the new level with weight 1/2; the time
differences, the well quotient and ``|v_new|^2`` are differentiated
directly.
"""
import numpy as np

from .model import density_coefficients, well_difference_quotient


class Layout:
    def __init__(self, d):
        self.d = d
        self.C = 2 * d + 4
        self.PHI = 0
        self.V = list(range(1, d + 1))
        self.LAM = d + 1
        self.A = d + 2
        self.B = d + 3
        self.Q = list(range(d + 4, 2 * d + 4))
        self.K = d + 1

    def vol_pairs(self):
        L = self
        pairs = [(L.PHI, L.PHI)] + [(L.PHI, m) for m in L.V]
        for r in L.V:
            pairs += [(r, L.PHI)] + [(r, m) for m in L.V] + [(r, L.A), (r, L.B)]
        pairs += [(L.LAM, L.PHI)] + [(L.LAM, m) for m in L.V]
        pairs += [(L.A, L.PHI)] + [(L.B, m) for m in L.V]
        return pairs

    def fac_pairs(self):
        L = self
        pairs = []
        for r in (L.PHI, L.LAM):
            pairs += [(r, L.PHI)] + [(r, m) for m in L.V]
        for r in L.V:
            pairs += [(r, m) for m in L.V] + [(r, L.PHI), (r, L.A), (r, L.B)]
        return pairs


def _rot(v, omega):
    """2 omega e_z x v in the plane."""
    return 2.0 * omega * np.stack([-v[..., 1], v[..., 0]], axis=-1)


def volume_terms(params, L, k, old, new, mid, gmid, gpsi, jacobian=True):
    """Nonlinear volume integrands.

    ``old/new/mid (E, nq, C)`` values, ``gmid (E, nq, C, d)`` midpoint
    gradients, ``gpsi (E, nq, d)`` gradient of the projected body-force
    potential. Returns ``fr`` and (optionally) the Jacobian entry dict.
    """
    d = L.d
    r0, r1 = density_coefficients(params)
    cp, cm = params.c_plus, params.c_minus
    omega = params.omega
    E, nq, C = mid.shape
    K = L.K

    phi = mid[..., 0]
    v = mid[..., 1:1 + d]
    gphi = gmid[..., 0, :]
    Dv = gmid[..., 1:1 + d, :]            # Dv[..., m, j] = d v_m / d x_j
    ga = gmid[..., L.A, :]
    gb = gmid[..., L.B, :]
    rho = r0 + r1 * phi
    divv = np.einsum("...mm->...", Dv)
    trans = np.einsum("...j,...j->...", gphi, v) + phi * divv
    dvdt = (new[..., 1:1 + d] - old[..., 1:1 + d]) / k
    conv = np.einsum("...j,...dj->...d", v, Dv) - np.einsum("...j,...jd->...d", v, Dv)
    w2grad = (ga - cm * gb) / cp
    rot = _rot(v, omega) if (d == 2 and omega) else np.zeros_like(v)
    # momentum terms proportional to rho
    mom = dvdt + conv - gpsi + rot

    fr = np.zeros((E, nq, C, K))
    fr[..., 0, 0] = trans
    for dd in range(d):
        fr[..., 1 + dd, 0] = rho * mom[..., dd] + phi * w2grad[..., dd]
    fr[..., L.LAM, 0] = -(cm / cp) * trans
    Wq, dWq = well_difference_quotient(params, old[..., 0], new[..., 0], derivative=True)
    fr[..., L.A, 0] = -cp * Wq
    vn = new[..., 1:1 + d]
    vo = old[..., 1:1 + d]
    fr[..., L.B, 0] = -(params.rho1 + params.rho2) / 8.0 * (
        np.einsum("...d,...d->...", vn, vn) + np.einsum("...d,...d->...", vo, vo))
    if not jacobian:
        return fr, None

    h = 0.5
    J = {}

    def entry(r, c):
        arr = np.zeros((E, nq, K, K))
        J[(r, c)] = arr
        return arr

    c = entry(0, 0)
    c[..., 0, 0] = h * divv
    c[..., 0, 1:] = h * v
    for m in range(d):
        c = entry(0, 1 + m)
        c[..., 0, 0] = h * gphi[..., m]
        c[..., 0, 1 + m] = h * phi

    for dd in range(d):
        r = 1 + dd
        c = entry(r, 0)
        c[..., 0, 0] = h * (r1 * mom[..., dd] + w2grad[..., dd])
        for m in range(d):
            c = entry(r, 1 + m)
            val = h * rho * (Dv[..., dd, m] - Dv[..., m, dd])
            if dd == m:
                val = val + rho / k
            if d == 2 and omega:
                # d(2 omega e_z x v)_dd / d v_m
                sgn = {(0, 1): -1.0, (1, 0): 1.0}.get((dd, m), 0.0)
                val = val + h * rho * 2.0 * omega * sgn
            c[..., 0, 0] = val
            for j in range(d):
                g = (v[..., j] if m == dd else 0.0) - (v[..., m] if j == dd else 0.0)
                c[..., 0, 1 + j] = h * rho * g
        c = entry(r, L.A)
        c[..., 0, 1 + dd] = h * phi / cp
        c = entry(r, L.B)
        c[..., 0, 1 + dd] = -h * phi * cm / cp

    c = entry(L.LAM, 0)
    c[...] = -(cm / cp) * J[(0, 0)]
    for m in range(d):
        c = entry(L.LAM, 1 + m)
        c[...] = -(cm / cp) * J[(0, 1 + m)]
    c = entry(L.A, 0)
    c[..., 0, 0] = -cp * dWq
    for m in range(d):
        c = entry(L.B, 1 + m)
        c[..., 0, 0] = -(params.rho1 + params.rho2) / 4.0 * vn[..., m]
    return fr, J


def facet_terms(params, L, tmid, normal, interior, psi_tr, jacobian=True):
    """Nonlinear facet integrands.

    ``tmid (F, 2, nq, C)`` midpoint traces (side 1 zero on the boundary),
    ``normal (F, d)`` outward from K1, ``interior (F,)`` bool,
    ``psi_tr (F, 2, nq)`` potential traces.
    """
    d = L.d
    r0, r1 = density_coefficients(params)
    cp, cm = params.c_plus, params.c_minus
    F, _, nq, C = tmid.shape
    sgn = np.array([1.0, -1.0])
    # average weights: 1/2 inside, one-sided on the boundary
    wav = np.where(interior[:, None], 0.5, np.array([1.0, 0.0])[None, :])   # (F, 2)
    inner = interior.astype(float)[:, None]                                   # (F, 1)

    phi = tmid[..., 0]                       # (F, 2, nq)
    v = tmid[..., 1:1 + d]                   # (F, 2, nq, d)
    rho = r0 + r1 * phi
    vn = np.einsum("fsqd,fd->fsq", v, normal)
    flux = phi[:, 0] * vn[:, 0] - phi[:, 1] * vn[:, 1]          # (F, nq)

    w = v[:, 0] - v[:, 1]                                       # (F, nq, d)
    mm = 0.5 * (rho[:, 0, :, None] * v[:, 0] + rho[:, 1, :, None] * v[:, 1])
    mn = np.einsum("fqd,fd->fq", mm, normal)
    ksq = np.einsum("fqd,fqd->fq", v[:, 0], v[:, 0]) - np.einsum("fqd,fqd->fq", v[:, 1], v[:, 1])
    w2 = tmid[..., L.A] - cm * tmid[..., L.B]
    W2 = w2[:, 0] - w2[:, 1]
    P = psi_tr[:, 0] - psi_tr[:, 1]

    hr = np.zeros((F, 2, nq, C))
    for t in range(2):
        hr[:, t, :, 0] = -wav[:, t, None] * flux
        hr[:, t, :, L.LAM] = wav[:, t, None] * (cm / cp) * flux
        scal = 0.25 * ksq * rho[:, t] - W2 * phi[:, t] / (2.0 * cp) + 0.5 * P * rho[:, t]
        for dd in range(d):
            hr[:, t, :, 1 + dd] = inner * (-0.5 * w[..., dd] * mn + scal * normal[:, None, dd])
    if not jacobian:
        return hr, None

    h = 0.5
    J = {}

    def zeros():
        return np.zeros((F, nq, 2, 2))

    c_pp = zeros()
    c_pv = [zeros() for _ in range(d)]
    for t in range(2):
        for s in range(2):
            c_pp[:, :, t, s] = -wav[:, t, None] * h * sgn[s] * vn[:, s]
            for m in range(d):
                c_pv[m][:, :, t, s] = -wav[:, t, None] * h * sgn[s] * phi[:, s] * normal[:, None, m]
    J[(0, 0)] = c_pp
    for m in range(d):
        J[(0, 1 + m)] = c_pv[m]
    J[(L.LAM, 0)] = -(cm / cp) * c_pp
    for m in range(d):
        J[(L.LAM, 1 + m)] = -(cm / cp) * c_pv[m]

    for dd in range(d):
        r = 1 + dd
        nd = normal[:, None, dd]
        for m in range(d):
            c = zeros()
            nm = normal[:, None, m]
            for t in range(2):
                for s in range(2):
                    val = -0.5 * w[..., dd] * 0.5 * rho[:, s] * nm + 0.5 * sgn[s] * v[:, s, :, m] * rho[:, t] * nd
                    if dd == m:
                        val = val - 0.5 * sgn[s] * mn
                    c[:, :, t, s] = inner * h * val
            J[(r, 1 + m)] = c
        c_phi, c_a, c_b = zeros(), zeros(), zeros()
        for t in range(2):
            for s in range(2):
                val = -0.5 * w[..., dd] * 0.5 * r1 * vn[:, s]
                if s == t:
                    val = val + (0.25 * ksq * r1 - W2 / (2.0 * cp) + 0.5 * P * r1) * nd
                c_phi[:, :, t, s] = inner * h * val
                c_a[:, :, t, s] = inner * h * (-sgn[s] / (2.0 * cp)) * phi[:, t] * nd
                c_b[:, :, t, s] = inner * h * (sgn[s] * cm / (2.0 * cp)) * phi[:, t] * nd
        J[(r, 0)] = c_phi
        J[(r, L.A)] = c_a
        J[(r, L.B)] = c_b
    return hr, J
