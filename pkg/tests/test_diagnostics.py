import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qidg.diagnostics import (dissipation_terms, discrete_energy, energy_report, estimate_eoc,
                              field_error_norm, max_velocity, potential_energy,
                              step_energy_deviation, total_mass)
from qidg.errors import OutOfDomainError
from qidg.mesh import build_mesh
from qidg.model import ModelParams
from qidg.scheme import State, TimeGrid, advance, initial_state, newton_solve
from qidg.space import DgSpace, FieldCoeffs, l2_project


def simple_state(space, phi, v=None):
    d = space.dim
    z = lambda c: FieldCoeffs(space, c)
    ph = l2_project(space, lambda x: np.full(x.shape[:-1], float(phi)))
    vel = z(d) if v is None else l2_project(space, lambda x: np.broadcast_to(np.asarray(v, float),
                                                                             x.shape[:-1] + (d,)))
    return State(ph, vel, z(1), z(1), z(1), z(d))


def test_energy_examples():
    params = ModelParams()
    line = DgSpace(build_mesh("interval(-1,1,4)"), 1)
    assert discrete_energy(params, simple_state(line, 0.0)) == pytest.approx(2.0, abs=1e-13)
    assert discrete_energy(params, simple_state(line, 1.0)) == pytest.approx(0.0, abs=1e-13)
    square = DgSpace(build_mesh("rectangle(0,1,0,1,2,2)"), 1)
    assert discrete_energy(params, simple_state(square, 0.0, (1.0, 0.0))) == pytest.approx(1.75, abs=1e-13)


def test_mass_examples():
    params = ModelParams(rho1=1.0, rho2=2.0)
    line = DgSpace(build_mesh("interval(-1,1,4)"), 2)
    assert total_mass(params, simple_state(line, 0.0)) == pytest.approx(3.0, abs=1e-13)
    assert total_mass(params, simple_state(line, 1.0)) == pytest.approx(2.0, abs=1e-13)


def test_mass_after_step():
    space = DgSpace(build_mesh("interval(-1,1,32)"), 1)
    params = ModelParams()
    s = initial_state(space, params, "random", seed=3)
    new = newton_solve(params, s, 0.01)
    assert abs(total_mass(params, new) - total_mass(params, s)) <= 100 * 1e-10


def test_max_velocity_examples():
    space = DgSpace(build_mesh("rectangle(0,1,0,1,2,2)"), 1)
    assert max_velocity(simple_state(space, 0.0)) == 0.0
    assert max_velocity(simple_state(space, 0.0, (1.0, 0.0))) == pytest.approx(1.0, abs=1e-13)


def test_deviation_pure_phase_and_perturbed():
    space = DgSpace(build_mesh("interval(-1,1,16)"), 1)
    params = ModelParams()
    s = initial_state(space, params, "pure-phase")
    assert abs(step_energy_deviation(params, s, newton_solve(params, s, 0.01), 0.01)) <= 1e-14
    r = initial_state(space, params, "random", seed=9, amplitude=0.1)
    new = newton_solve(params, r, 0.01)
    assert abs(step_energy_deviation(params, r, new, 0.01)) <= 1e-8
    bad = new.copy()
    bad.phi.data[3, 0, 0] += 1e-3
    assert abs(step_energy_deviation(params, r, bad, 0.01)) > 1e-6


def test_dissipation_nonnegative():
    space = DgSpace(build_mesh("rectangle(0,1,0,1,3,3)"), 1)
    params = ModelParams(viscosity="ns", eta1=1e-3, eta2=5e-3)
    rng = np.random.default_rng(0)
    for _ in range(5):
        U = rng.standard_normal(space.n_elements * 8 * space.nb)
        a = State.from_vector(space, U)
        b = State.from_vector(space, U + rng.standard_normal(U.size))
        terms = dissipation_terms(params, a, b)
        scale = float(np.abs(U).max()) ** 2
        assert all(val >= -1e-10 * scale for val in terms.values())


def test_rotating_frame_energy_equality():
    space = DgSpace(build_mesh("disk(1,2)"), 1)
    params = ModelParams(viscosity="ns", eta1=1e-3, eta2=5e-3, omega=1.0)
    s = initial_state(space, params, "rotating-bubble")
    assert potential_energy(params, s) < 0
    devs = []
    advance(params, s, TimeGrid.fixed_step(0.01, 0.03),
            hooks=[lambda n, o, w, k, rep: devs.append(step_energy_deviation(params, o, w, k))])
    assert max(abs(x) for x in devs) <= 1e-8


def test_energy_report_fields():
    space = DgSpace(build_mesh("interval(-1,1,8)"), 1)
    params = ModelParams()
    s = initial_state(space, params, "random", seed=2)
    new = newton_solve(params, s, 0.01)
    rep = energy_report(params, new, s, 0.01)
    assert rep.energy == pytest.approx(discrete_energy(params, new))
    assert set(rep.dissipation) == {"reaction", "diffusion", "viscous"}
    assert np.isnan(energy_report(params, s).deviation)


def test_error_norm_examples():
    space = DgSpace(build_mesh("rectangle(0,1,0,1,2,2)"), 2)
    s = initial_state(space, ModelParams(), "random", seed=1)
    own = lambda x, t: space.eval_quad(s.phi.data)[0][..., 0]
    assert field_error_norm([s], own) == 0.0
    shifted = lambda x, t: space.eval_quad(s.phi.data)[0][..., 0] - 0.25
    assert field_error_norm([s], shifted) == pytest.approx(0.25, rel=1e-13)
    vel = lambda x, t: np.zeros(x.shape[:-1] + (2,))
    assert field_error_norm([s], vel, "v") == 0.0
    with pytest.raises(ValueError):
        field_error_norm([s], own, "rho")


def test_eoc_examples():
    assert estimate_eoc([(10, 1.0), (20, 0.5)]) == [pytest.approx(1.0)]
    # published values carry 5 significant digits, so the quoted EOC is good to ~1e-3
    for rows, quoted in ([(2048, 1.5217e-04), (4096, 3.7793e-05)], 2.010), \
                        ([(512, 1.7291e-04), (1024, 1.8023e-05)], 3.262):
        got = estimate_eoc(rows)[0]
        assert got == pytest.approx(np.log2(rows[0][1] / rows[1][1]), rel=1e-15)
        assert got == pytest.approx(quoted, abs=1e-3)
    assert estimate_eoc([(32, 1.0)]) == []


@pytest.mark.parametrize("bad", [[(8, 0.0), (16, 1.0)], [(8, -1.0), (16, 1.0)],
                                 [(8, float("nan")), (16, 1.0)], [(8, 1.0), (8, 0.5)]])
def test_eoc_domain_errors(bad):
    with pytest.raises(OutOfDomainError):
        estimate_eoc(bad)


@settings(max_examples=100, deadline=None)
@given(errs=st.lists(st.floats(1e-12, 1e3), min_size=2, max_size=6),
       scale=st.floats(1e-6, 1e6))
def test_eoc_scale_invariant(errs, scale):
    ns = [2 ** (5 + i) for i in range(len(errs))]
    a = estimate_eoc(list(zip(ns, errs)))
    b = estimate_eoc([(n, scale * e) for n, e in zip(ns, errs)])
    assert np.allclose(a, b, rtol=1e-9, atol=1e-9)
