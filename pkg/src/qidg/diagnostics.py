"""Energy and mass functionals, the per-step energy audit, error norms, EOC."""
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import OutOfDomainError, ShapeError
from .model import density_of_phase, well_eval
from .scheme import State, get_operator


@dataclass
class EnergyReport:
    """Diagnostics of one time level (and of the step leading to it).

    ``energy`` includes the potential term ``potential``; for the plain
    energy without body forces read ``energy - potential``. Dissipation
    entries refer to the midpoint of the step that produced this level and are
    empty for the initial level.
    """
    t: float
    energy: float
    potential: float
    mass: float
    max_velocity: float
    deviation: float = math.nan
    dissipation: dict = field(default_factory=dict)


def _values(state):
    space = state.space
    vals, _ = space.eval_quad(state.to_vector().reshape(space.n_elements, -1, space.nb))
    return vals


def potential_energy(params, state, pin_lambda=None):
    """``-int rho(phi_h) psi`` with ``psi = omega^2 |x|^2 / 2 - g . x``.

    This is the rotating-frame correction ``-omega^2 int rho |x|^2 / 2``
    plus the gravitational potential energy; zero without body forces.
    """
    space = state.space
    if not params.omega and not any(params.g[:space.dim]):
        return 0.0
    op = get_operator(space, params, pin_lambda)
    rho = density_of_phase(params, _values(state)[..., 0])
    return float(-np.sum(space.W * rho * op.psi_fun(space.X)))


def discrete_energy(params, state, pin_lambda=None):
    """``int W(phi) + rho(phi) |v|^2 / 2 + gamma |q|^2 / 2`` plus the potential term."""
    space = state.space
    d = space.dim
    vals = _values(state)
    phi = vals[..., 0]
    v = vals[..., 1:1 + d]
    q = vals[..., d + 4:2 * d + 4]
    dens = (well_eval(params, phi)[0]
            + 0.5 * density_of_phase(params, phi) * np.sum(v * v, axis=-1)
            + 0.5 * params.gamma * np.sum(q * q, axis=-1))
    return float(np.sum(space.W * dens)) + potential_energy(params, state, pin_lambda)


def total_mass(params, state):
    """``int rho(phi_h)`` by the scheme's quadrature."""
    space = state.space
    phi = _values(state)[..., 0]
    return float(np.sum(space.W * density_of_phase(params, phi)))


def _midpoint(old, new):
    if old.space is not new.space:
        raise ShapeError("states live on different spaces")
    return State.from_vector(old.space, 0.5 * (old.to_vector() + new.to_vector()))


def dissipation_terms(params, state_old, state_new, pin_lambda=None):
    """Midpoint rates ``m_r |a|^2``, ``-m_j A1(a, a)`` and the viscous term
    ``-eta A2(v, v)`` (or the Navier-Stokes tensor form). Each is >= 0 up to
    roundoff."""
    mid = _midpoint(state_old, state_new)
    op = get_operator(mid.space, params, pin_lambda)
    a = mid.a.vector
    v = mid.v.vector
    A1 = op.ctx.a1_matrix()
    V = op.ctx.viscous_matrix(params)
    return {
        "reaction": float(params.m_r * a @ a),
        "diffusion": float(-params.m_j * a @ (A1 @ a)),
        "viscous": float(-v @ (V @ v)),
    }


def step_energy_deviation(params, state_old, state_new, k_n, pin_lambda=None):
    """``E(new) - E(old) + k (sum of dissipation terms)``; zero for an exact step."""
    terms = dissipation_terms(params, state_old, state_new, pin_lambda)
    return (discrete_energy(params, state_new, pin_lambda)
            - discrete_energy(params, state_old, pin_lambda)
            + k_n * sum(terms.values()))


def max_velocity(state):
    """Largest ``|v_h|`` over the quadrature points."""
    d = state.space.dim
    v = _values(state)[..., 1:1 + d]
    return float(np.sqrt(np.max(np.sum(v * v, axis=-1))))


def min_density(params, state):
    return float(np.min(density_of_phase(params, _values(state)[..., 0])))


def max_phase(state):
    return float(np.max(_values(state)[..., 0]))


def energy_report(params, state, previous=None, k_n=None, pin_lambda=None):
    E = discrete_energy(params, state, pin_lambda)
    rep = EnergyReport(state.t, E, potential_energy(params, state, pin_lambda),
                       total_mass(params, state), max_velocity(state))
    if previous is not None:
        rep.dissipation = dissipation_terms(params, previous, state, pin_lambda)
        rep.deviation = (E - discrete_energy(params, previous, pin_lambda)
                         + k_n * sum(rep.dissipation.values()))
    return rep


def _slice(which, d):
    if which in ("phi", "φ"):
        return slice(0, 1)
    if which == "v":
        return slice(1, 1 + d)
    if which in ("lam", "lambda", "λ"):
        return slice(d + 1, d + 2)
    raise ValueError(f"which must be 'phi', 'v' or 'lam', got {which!r}")


def field_error_norm(trajectory, exact, which="phi"):
    """Max over the given states of the L2 error of one field.

    ``exact(x, t)`` returns values of shape ``x.shape[:-1]`` for scalars or
    ``x.shape[:-1] + (d,)`` for ``v``.
    """
    worst = 0.0
    for st in trajectory:
        space = st.space
        sl = _slice(which, space.dim)
        num = _values(st)[..., sl]
        ex = np.asarray(exact(space.X, st.t), dtype=float)
        ex = np.broadcast_to(ex.reshape(ex.shape[:2] + (-1,)), num.shape)
        err = math.sqrt(float(np.sum(space.W[..., None] * (num - ex) ** 2)))
        worst = max(worst, err)
    return worst


def estimate_eoc(errors):
    """``EOC_i = log(e_{i-1} / e_i) / log(N_i / N_{i-1})`` for consecutive pairs.

    ``errors`` is a sequence of ``(N, e)``; returns one value fewer than given.
    """
    pairs = [(float(n), float(e)) for n, e in errors]
    for n, e in pairs:
        if not (e > 0 and math.isfinite(e)):
            raise OutOfDomainError(f"errors must be positive and finite, got {e!r}")
        if not n > 0:
            raise OutOfDomainError(f"resolutions must be positive, got {n!r}")
    out = []
    for (n0, e0), (n1, e1) in zip(pairs, pairs[1:]):
        if n1 == n0:
            raise OutOfDomainError("consecutive resolutions must differ")
        out.append(math.log(e0 / e1) / math.log(n1 / n0))
    return out
