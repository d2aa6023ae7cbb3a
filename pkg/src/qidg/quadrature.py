"""Gauss rules on the reference interval ``[0, 1]`` and reference triangle.

Triangle rules are collapsed (Duffy) tensor products of Gauss-Legendre and
Gauss-Jacobi(1, 0) points, so all weights are positive and any degree is
available up to ``MAX_DEGREE``.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .errors import CapabilityError

MAX_DEGREE = 60


@dataclass(frozen=True)
class QuadRule:
    points: np.ndarray    # (nq, d) reference coordinates
    weights: np.ndarray   # (nq,)
    degree: int
    kind: str

    def __len__(self):
        return len(self.weights)


def _n_points(degree):
    return degree // 2 + 1


@lru_cache(maxsize=None)
def _interval(degree):
    x, w = roots_legendre(_n_points(degree))
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def _triangle(degree):
    n = _n_points(degree)
    r, wr = roots_legendre(n)
    s, ws = roots_jacobi(n, 1.0, 0.0)
    R, S = np.meshgrid(r, s, indexing="ij")
    W = np.outer(wr, ws) / 8.0
    xi = 0.25 * (1.0 + R) * (1.0 - S)
    eta = 0.5 * (1.0 + S)
    return np.stack([xi.ravel(), eta.ravel()], axis=1), W.ravel()


def quadrature_rule(kind, degree, dim=2):
    """Quadrature exact for polynomials of total degree ``<= degree``.

    ``kind`` is ``"interval"``, ``"triangle"`` or ``"facet"``; a facet rule
    lives on the reference facet of a ``dim``-dimensional element (a single
    point of weight one in 1D, the unit interval in 2D).
    """
    degree = int(degree)
    if degree < 0:
        raise ValueError("quadrature degree must be non-negative")
    if degree > MAX_DEGREE:
        raise CapabilityError(f"quadrature degree {degree} exceeds {MAX_DEGREE}")
    kind = kind.replace("reference-", "")
    if kind == "facet":
        if dim == 1:
            return QuadRule(np.zeros((1, 0)), np.ones(1), degree, "point")
        kind = "interval"
    if kind == "interval":
        x, w = _interval(degree)
        return QuadRule(x[:, None].copy(), w.copy(), degree, "interval")
    if kind == "triangle":
        x, w = _triangle(degree)
        return QuadRule(x.copy(), w.copy(), degree, "triangle")
    raise ValueError(f"unknown quadrature domain {kind!r}")
