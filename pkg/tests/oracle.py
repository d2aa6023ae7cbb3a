"""Slow reference assembly of the fully discrete residual.

Loops over elements, facets and quadrature points one at a time and
evaluates every term straight from the weak form, so it shares no code
with the vectorised kernels beyond the basis functions, the volume
quadrature rule and the (separately tested) bilinear-form matrices.

Facet sets follow the package conventions: transport-type jumps
(``[[phi v]]``, ``[[v]]``, ``[[q]]``) run over interior and boundary facets,
the momentum facet terms and the ``q``-equation lifting over interior facets
only.
"""
import numpy as np

from qidg.basis import reference_basis
from qidg.forms import FormContext
from qidg.model import well_difference_quotient
from qidg.quadrature import quadrature_rule


class Evaluator:
    def __init__(self, space, X):
        self.space = space
        self.mesh = space.mesh
        self.X = X                       # (E, C, nb)

    def basis(self, e, x):
        m = self.mesh
        xi = m.invj[e] @ (np.asarray(x, float) - m.origin[e])
        vals, grads = reference_basis(m.dim, self.space.degree, xi[None, :])
        s = 1.0 / np.sqrt(m.detj[e])
        return vals[0] * s, (grads[0] @ m.invj[e]) * s   # (nb,), (nb, d)

    def fields(self, e, x):
        b, g = self.basis(e, x)
        return self.X[e] @ b, np.einsum("ci,id->cd", self.X[e], g)


def _facet_points(mesh, f, n):
    a, *rest = mesh.facet_vertices[f]
    if mesh.dim == 1:
        return [mesh.vertices[a]], [1.0]
    b = rest[0]
    t, w = np.polynomial.legendre.leggauss(n)
    t = 0.5 * (t + 1.0)
    w = 0.5 * w * mesh.facet_measure[f]
    A, B = mesh.vertices[a], mesh.vertices[b]
    return [A + ti * (B - A) for ti in t], list(w)


def reference_residual(space, params, Uo, Un, k, qdeg=None):
    mesh = space.mesh
    d, nb, E = space.dim, space.nb, space.n_elements
    C = 2 * d + 4
    PHI, V, LAM, A, B = 0, list(range(1, d + 1)), d + 1, d + 2, d + 3
    Q = list(range(d + 4, 2 * d + 4))
    cp, cm = params.c_plus, params.c_minus
    r1 = 0.5 * (params.rho1 - params.rho2)
    r0 = 0.5 * (params.rho1 + params.rho2)
    # the modified well is only piecewise polynomial, so the volume rule must
    # be the scheme's own for the two sides to agree to roundoff
    qdeg = qdeg or space.quad_degree
    rule = quadrature_rule("interval" if d == 1 else "triangle", qdeg)
    Xo = Uo.reshape(E, C, nb)
    Xn = Un.reshape(E, C, nb)
    Xm = 0.5 * (Xo + Xn)
    ev_o, ev_n, ev_m = Evaluator(space, Xo), Evaluator(space, Xn), Evaluator(space, Xm)
    R = np.zeros((E, C, nb))

    g = np.zeros(d)
    g[:d] = params.g[:d]
    om = params.omega

    def psi(x):
        return 0.5 * om * om * x @ x - g @ x

    # body-force potential, projected with this rule
    psi_c = np.zeros((E, nb))
    for e in range(E):
        for xi, w in zip(rule.points, rule.weights):
            x = mesh.origin[e] + mesh.jac[e] @ xi
            b, _ = ev_m.basis(e, x)
            psi_c[e] += w * mesh.detj[e] * psi(x) * b
    ev_psi = Evaluator(space, psi_c[:, None, :])

    for e in range(E):
        for xi, w0 in zip(rule.points, rule.weights):
            x = mesh.origin[e] + mesh.jac[e] @ xi
            w = w0 * mesh.detj[e]
            b, gb = ev_m.basis(e, x)
            um, gm = ev_m.fields(e, x)
            uo, _ = ev_o.fields(e, x)
            un, _ = ev_n.fields(e, x)
            phi, v = um[PHI], um[V]
            gphi, Dv = gm[PHI], gm[V]            # Dv[m, j] = d v_m / d x_j
            rho = r0 + r1 * phi
            div_phiv = gphi @ v + phi * np.trace(Dv)
            dphi = (un[PHI] - uo[PHI]) / k
            R[e, PHI] += w * (dphi + div_phiv + cp * params.m_r * um[A]) * b
            conv = Dv @ v - Dv.T @ v
            dv = (un[V] - uo[V]) / k
            gpsi = ev_psi.fields(e, x)[1][0]
            force = rho * (dv + conv - gpsi)
            if d == 2 and om:
                force = force + rho * 2 * om * np.array([-v[1], v[0]])
            force = force + gm[B] + phi / cp * (gm[A] - cm * gm[B])
            for i, c in enumerate(V):
                R[e, c] += w * force[i] * b
            R[e, LAM] += w * (np.trace(Dv) - cm / cp * (dphi + div_phiv)) * b
            Wq = well_difference_quotient(params, uo[PHI], un[PHI])
            divq = sum(gm[Q[i], i] for i in range(d))
            R[e, A] += w * (um[A] - cp * Wq - cm * um[LAM] + cp * params.gamma * divq) * b
            R[e, B] += w * (um[B] - um[LAM] - (params.rho1 + params.rho2) / 8
                            * (un[V] @ un[V] + uo[V] @ uo[V])) * b
            for i, c in enumerate(Q):
                R[e, c] += w * (um[c] - gphi[i]) * b

    nf = 3 if d == 1 else qdeg // 2 + 3
    for f in range(mesh.n_facets):
        k1, k2 = mesh.facet_elements[f]
        n = mesh.facet_normal[f]
        inner = k2 >= 0
        pts, wts = _facet_points(mesh, f, nf)
        for x, w in zip(pts, wts):
            sides = [k1, k2] if inner else [k1]
            tr = [ev_m.fields(e, x)[0] for e in sides]
            bs = [ev_m.basis(e, x)[0] for e in sides]
            ps = [ev_psi.fields(e, x)[0][0] for e in sides]
            sg = [1.0, -1.0]
            half = 0.5 if inner else 1.0

            def jump_n(fn):
                # vector jump sum_s u_s . n_s (one-sided on the boundary)
                return sum(sg[s] * fn(tr[s]) @ n for s in range(len(sides)))

            jphiv = jump_n(lambda u: u[PHI] * u[V])
            jv = jump_n(lambda u: u[V])
            jq = jump_n(lambda u: u[Q])
            for s, e in enumerate(sides):
                avg_test = half * bs[s]
                R[e, PHI] -= w * jphiv * avg_test
                R[e, LAM] += w * (cm / cp * jphiv - jv) * avg_test
                R[e, A] -= w * cp * params.gamma * jq * avg_test
            if not inner:
                continue
            u1, u2 = tr
            rho = [r0 + r1 * u[PHI] for u in tr]
            avg_rv = 0.5 * (rho[0] * u1[V] + rho[1] * u2[V])
            jump_vt = np.outer(u1[V] - u2[V], n)            # [[v]]_tensor
            jump_ksq = (u1[V] @ u1[V] - u2[V] @ u2[V]) * n  # [[|v|^2]]
            jw = (u1[A] - cm * u1[B]) - (u2[A] - cm * u2[B])
            jb = u1[B] - u2[B]
            jpsi = ps[0] - ps[1]
            for s, e in enumerate(sides):
                for i, c in enumerate(V):
                    Xi = np.zeros(d)
                    Xi[i] = 1.0
                    for m_ in range(nb):
                        t = bs[s][m_]
                        avgXi = 0.5 * t * Xi
                        val = (-np.outer(avgXi, avg_rv).ravel() @ jump_vt.ravel()
                               + 0.5 * jump_ksq @ (0.5 * rho[s] * t * Xi)
                               - jb * (n @ avgXi)
                               - jw / cp * (n @ (0.5 * tr[s][PHI] * t * Xi))
                               + jpsi * (n @ (0.5 * rho[s] * t * Xi)))
                        R[e, c, m_] += w * val
            for s, e in enumerate(sides):
                for i, c in enumerate(Q):
                    R[e, c] += w * (u1[PHI] - u2[PHI]) * n[i] * 0.5 * bs[s]

    # linear SIP parts, taken from the form matrices
    ctx = FormContext(space)
    A1 = ctx.a1_matrix()
    Vm = ctx.viscous_matrix(params)
    R[:, PHI] -= cp * params.m_j * (A1 @ Xm[:, A].ravel()).reshape(E, nb)
    vm = Xm[:, V].reshape(-1)
    R[:, V] -= (Vm @ vm).reshape(E, d, nb)
    R[:, [PHI] + V + [LAM]] *= k
    return R.ravel()
