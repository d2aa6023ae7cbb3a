"""Contraction and scatter kernels for residual/Jacobian assembly.

Each kernel has a numba version and a numpy (einsum) version with identical
results up to summation order; :mod:`qidg._accel` picks one per call.

Shapes used throughout:

``W (E, nq)``            volume weights
``Phi (E, nq, nb, K)``   basis values (kind 0) and physical gradients (kinds 1..d)
``fW (F, nq)``           facet weights
``fB (F, 2, nq, nb)``    facet traces from both sides
"""
import numpy as np

from . import _accel
from ._accel import njit


@njit
def _vol_blocks_nb(W, Phi, coef):
    E, nq, nb, K = Phi.shape
    out = np.zeros((E, nb, nb))
    tmp = np.empty((nb, K))
    for e in range(E):
        for q in range(nq):
            w = W[e, q]
            # tmp[j, a] = sum_b coef[a, b] Phi[j, b]
            for j in range(nb):
                for a in range(K):
                    s = 0.0
                    for b in range(K):
                        s += coef[e, q, a, b] * Phi[e, q, j, b]
                    tmp[j, a] = w * s
            for i in range(nb):
                for j in range(nb):
                    s = 0.0
                    for a in range(K):
                        s += Phi[e, q, i, a] * tmp[j, a]
                    out[e, i, j] += s
    return out


def vol_blocks(W, Phi, coef):
    """``out[e, i, j] = sum_q W coef[a, b] Phi[i, a] Phi[j, b]``."""
    if _accel.use_numba:
        return _vol_blocks_nb(W, Phi, coef)
    return np.einsum("eq,eqab,eqia,eqjb->eij", W, coef, Phi, Phi, optimize=True)


@njit
def _fac_blocks_nb(fW, fB, coef):
    F, _, nq, nb = fB.shape
    out = np.zeros((F, 2, 2, nb, nb))
    for f in range(F):
        for q in range(nq):
            w = fW[f, q]
            for t in range(2):
                for s in range(2):
                    c = w * coef[f, q, t, s]
                    if c == 0.0:
                        continue
                    for i in range(nb):
                        bi = c * fB[f, t, q, i]
                        for j in range(nb):
                            out[f, t, s, i, j] += bi * fB[f, s, q, j]
    return out


def fac_blocks(fW, fB, coef):
    """``out[f, t, s, i, j] = sum_q fW coef[t, s] fB[t, i] fB[s, j]``."""
    if _accel.use_numba:
        return _fac_blocks_nb(fW, fB, coef)
    return np.einsum("fq,fqts,ftqi,fsqj->ftsij", fW, coef, fB, fB, optimize=True)


@njit
def _vol_residual_nb(W, Phi, fr):
    E, nq, nb, K = Phi.shape
    C = fr.shape[2]
    out = np.zeros((E, C, nb))
    for e in range(E):
        for q in range(nq):
            w = W[e, q]
            for c in range(C):
                for i in range(nb):
                    s = 0.0
                    for a in range(K):
                        s += fr[e, q, c, a] * Phi[e, q, i, a]
                    out[e, c, i] += w * s
    return out


def vol_residual(W, Phi, fr):
    """``out[e, c, i] = sum_q W fr[c, a] Phi[i, a]``."""
    if _accel.use_numba:
        return _vol_residual_nb(W, Phi, fr)
    return np.einsum("eq,eqca,eqia->eci", W, fr, Phi, optimize=True)


def fac_residual(fW, fB, hr):
    """``out[f, t, c, i] = sum_q fW hr[t, q, c] fB[t, q, i]`` (small, numpy only)."""
    return np.einsum("fq,ftqc,ftqi->ftci", fW, hr, fB, optimize=True)


@njit
def _scatter_nb(n, pos, vals):
    out = np.zeros(n + 1)
    for k in range(pos.shape[0]):
        out[pos[k]] += vals[k]
    return out[:n]


def scatter_add(n, pos, vals):
    """Sum ``vals`` into ``n`` bins; position ``n`` is a discard bin."""
    if _accel.use_numba:
        return _scatter_nb(n, pos, vals)
    return np.bincount(pos, weights=vals, minlength=n + 1)[:n]
