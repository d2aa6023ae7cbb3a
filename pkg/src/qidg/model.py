"""Physical constants and constitutive functions of the two-phase model."""
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import InvalidSpecError


@dataclass(frozen=True)
class ModelParams:
    """All physical and numerical constants of a run.

    ``viscosity`` selects the simplified vector Laplacian (``"simple"``, uses
    ``eta``) or the full Navier-Stokes tensor (``"ns"``, uses ``eta1``
    bulk and ``eta2`` shear). ``sigma=None`` means the default penalty
    for the polynomial degree in use; ``A=None`` means ``(rho2/rho1)**2``.
    ``g`` enters the momentum residual as ``+rho g . Xi``, so the physical
    acceleration is ``-g``.
    """

    rho1: float = 1.0
    rho2: float = 2.0
    gamma: float = 1e-3
    eta: float = 1e-3
    m_j: float = 1e-2
    m_r: float = 1e-2
    viscosity: str = "simple"
    eta1: float = 0.0
    eta2: float = 0.0
    sigma: float = None
    well: str = "quartic"
    A: float = None
    omega: float = 0.0
    g: tuple = field(default=(0.0, 0.0))

    def __post_init__(self):
        for name in ("rho1", "rho2", "gamma", "m_j", "m_r"):
            if not float(getattr(self, name)) > 0:
                raise InvalidSpecError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("eta", "eta1", "eta2"):
            if not float(getattr(self, name)) >= 0:
                raise InvalidSpecError(f"{name} must be non-negative, got {getattr(self, name)}")
        if self.sigma is not None and not self.sigma > 0:
            raise InvalidSpecError(f"sigma must be positive, got {self.sigma}")
        if self.viscosity not in ("simple", "ns"):
            raise InvalidSpecError(f"viscosity must be 'simple' or 'ns', got {self.viscosity!r}")
        if self.well not in ("quartic", "modified"):
            raise InvalidSpecError(f"well must be 'quartic' or 'modified', got {self.well!r}")
        if self.A is not None and not self.A >= 0:
            raise InvalidSpecError(f"A must be non-negative, got {self.A}")
        if not np.isfinite(self.omega):
            raise InvalidSpecError("omega must be finite")
        object.__setattr__(self, "g", tuple(float(c) for c in self.g))

    @property
    def well_A(self):
        if self.well != "modified":
            return 0.0
        return (self.rho2 / self.rho1) ** 2 if self.A is None else float(self.A)

    @property
    def c_plus(self):
        return 1.0 / self.rho1 + 1.0 / self.rho2

    @property
    def c_minus(self):
        return 1.0 / self.rho1 - 1.0 / self.rho2

    def with_(self, **kw):
        return replace(self, **kw)

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


def density_of_phase(params, phi):
    """rho(phi) = (rho1 (1 + phi) + rho2 (1 - phi)) / 2."""
    return 0.5 * (params.rho1 * (1.0 + np.asarray(phi)) + params.rho2 * (1.0 - np.asarray(phi)))


def density_coefficients(params):
    """``(r0, r1)`` with ``rho(phi) = r0 + r1 phi``."""
    return 0.5 * (params.rho1 + params.rho2), 0.5 * (params.rho1 - params.rho2)


def mixture_constants(params):
    return params.c_plus, params.c_minus


def _pos(x):
    return np.maximum(x, 0.0)


def well_eval(params, phi):
    """``(W, W', W''')`` of the configured double well."""
    phi = np.asarray(phi, dtype=float)
    W = (phi ** 2 - 1.0) ** 2
    dW = 4.0 * phi * (phi ** 2 - 1.0)
    d3W = 24.0 * phi
    A = params.well_A
    if A:
        up, lo = _pos(phi - 1.0), _pos(-1.0 - phi)
        # A[(x + |x|)^2 + ...] = 4A[x_+^2 + ...]
        W = W + 4.0 * A * (up ** 2 + lo ** 2)
        dW = dW + 8.0 * A * (up - lo)
    return W, dW, d3W


def _shifted_square_quotient(x, y):
    """Difference quotient of f(s) = (s - 1)_+^2 and its derivative in ``y``."""
    u = np.asarray(x, dtype=float) - 1.0
    w = np.asarray(y, dtype=float) - 1.0
    both_pos = (u >= 0) & (w >= 0)
    both_neg = (u <= 0) & (w <= 0)
    mixed = ~(both_pos | both_neg)
    den = np.where(mixed, w - u, 1.0)
    q = np.where(both_pos, u + w, 0.0)
    dq = np.where(both_pos, 1.0, 0.0)
    up = mixed & (w > 0)      # u < 0 < w
    dn = mixed & (w < 0)      # w < 0 < u
    q = np.where(up, w * w / den, q)
    q = np.where(dn, u * u / (-den), q)
    dq = np.where(up, w * (w - 2.0 * u) / den ** 2, dq)
    dq = np.where(dn, u * u / den ** 2, dq)
    return q, dq


def well_difference_quotient(params, phi_old, phi_new, derivative=False):
    """Exact ``[W(phi_new) - W(phi_old)] / (phi_new - phi_old)``.

    The quartic part uses ``W'(m) + W'''(m) d^2 / 24`` (``m`` midpoint,
    ``d`` increment), exact for quartics; the piecewise-quadratic penalty
    of the modified well has a closed-form quotient. At coincidence both
    reduce to ``W'``. With ``derivative=True`` also returns the derivative
    with respect to ``phi_new``.
    """
    x = np.asarray(phi_old, dtype=float)
    y = np.asarray(phi_new, dtype=float)
    m = 0.5 * (x + y)
    d = y - x
    q = 4.0 * m ** 3 - 4.0 * m + m * d * d
    dq = 0.5 * (12.0 * m * m - 4.0 + d * d) + 2.0 * m * d
    A = params.well_A
    if A:
        qa, dqa = _shifted_square_quotient(x, y)
        qb, dqb = _shifted_square_quotient(-x, -y)
        q = q + 4.0 * A * (qa - qb)
        dq = dq + 4.0 * A * (dqa + dqb)
    if derivative:
        return q, dq
    return q


def exact_steady_profile(params, x):
    """tanh(x sqrt(2/gamma)): a steady 1D solution with zero velocity."""
    return np.tanh(np.asarray(x, dtype=float) * np.sqrt(2.0 / params.gamma))


def exact_steady_profile_d2(params, x):
    """Second derivative of :func:`exact_steady_profile`."""
    k = np.sqrt(2.0 / params.gamma)
    t = np.tanh(np.asarray(x, dtype=float) * k)
    return -2.0 * k * k * t * (1.0 - t * t)


def chemical_potential_and_pressure(params, phi, lap_phi):
    """``mu = W'(phi) - gamma lap(phi)``, ``p = phi W'(phi) - W(phi)``."""
    W, dW, _ = well_eval(params, phi)
    mu = dW - params.gamma * np.asarray(lap_phi, dtype=float)
    return mu, phi * dW - W
