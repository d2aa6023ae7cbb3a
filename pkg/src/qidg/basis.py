"""Orthonormal modal bases on the reference simplices.

1D: scaled Legendre polynomials on ``[0, 1]``.
2D: Dubiner polynomials on the triangle ``(0,0), (1,0), (0,1)`` built from
collapsed coordinates, ordered by total degree; mode 0 is the constant.
"""
import numpy as np
from scipy.special import eval_jacobi, gammaln


def n_modes(dim, degree):
    if dim == 1:
        return degree + 1
    return (degree + 1) * (degree + 2) // 2


def mode_indices(degree):
    """Dubiner ``(i, j)`` pairs in graded order."""
    return [(i, t - i) for t in range(degree + 1) for i in range(t, -1, -1)]


def _jacobi_normalised(n, alpha, beta, x):
    log_g = ((alpha + beta + 1) * np.log(2.0) - np.log(2 * n + alpha + beta + 1)
             + gammaln(n + alpha + 1) + gammaln(n + beta + 1)
             - gammaln(n + alpha + beta + 1) - gammaln(n + 1))
    return eval_jacobi(n, alpha, beta, x) / np.exp(0.5 * log_g)


def _jacobi_normalised_deriv(n, alpha, beta, x):
    if n == 0:
        return np.zeros_like(x)
    return np.sqrt(n * (n + alpha + beta + 1)) * _jacobi_normalised(n - 1, alpha + 1, beta + 1, x)


def reference_basis(dim, degree, xi):
    """Values ``(nq, nb)`` and reference gradients ``(nq, nb, dim)`` at ``xi``."""
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    if dim == 1:
        return _legendre(degree, xi[:, 0])
    return _dubiner(degree, xi[:, 0], xi[:, 1])


def _legendre(degree, x):
    t = 2.0 * x - 1.0
    vals = np.empty((len(x), degree + 1))
    grads = np.empty((len(x), degree + 1, 1))
    for i in range(degree + 1):
        # orthonormal on [-1, 1] scaled by sqrt(2) for the unit interval
        vals[:, i] = np.sqrt(2.0) * _jacobi_normalised(i, 0, 0, t)
        grads[:, i, 0] = 2.0 * np.sqrt(2.0) * _jacobi_normalised_deriv(i, 0, 0, t)
    return vals, grads


def _dubiner(degree, xi, eta):
    r = 2.0 * xi - 1.0
    s = 2.0 * eta - 1.0
    denom = 1.0 - s
    safe = np.abs(denom) > 1e-14
    a = np.where(safe, 2.0 * (1.0 + r) / np.where(safe, denom, 1.0) - 1.0, -1.0)
    b = s
    modes = mode_indices(degree)
    vals = np.empty((len(r), len(modes)))
    grads = np.empty((len(r), len(modes), 2))
    half = 0.5 * (1.0 - b)
    for m, (i, j) in enumerate(modes):
        fa = _jacobi_normalised(i, 0, 0, a)
        dfa = _jacobi_normalised_deriv(i, 0, 0, a)
        gb = _jacobi_normalised(j, 2 * i + 1, 0, b)
        dgb = _jacobi_normalised_deriv(j, 2 * i + 1, 0, b)
        vals[:, m] = np.sqrt(2.0) * fa * gb * (1.0 - b) ** i
        dr = dfa * gb
        ds = dfa * gb * 0.5 * (1.0 + a)
        if i > 0:
            dr = dr * half ** (i - 1)
            ds = ds * half ** (i - 1)
        tmp = dgb * half ** i
        if i > 0:
            tmp = tmp - 0.5 * i * gb * half ** (i - 1)
        ds = ds + fa * tmp
        scale = 2.0 ** (i + 0.5)
        grads[:, m, 0] = dr * scale
        grads[:, m, 1] = ds * scale
    # biunit triangle (area 2) -> reference triangle (area 1/2):
    # values scale by 2, d/dxi = 2 d/dr
    return 2.0 * vals, 4.0 * grads
