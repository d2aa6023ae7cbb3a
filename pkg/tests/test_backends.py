import numpy as np
import pytest

from qidg import _accel, kernels
from qidg.mesh import build_mesh
from qidg.model import ModelParams
from qidg.scheme import get_operator
from qidg.space import DgSpace

pytestmark = pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not installed")


@pytest.fixture
def restore_backend():
    before = _accel.backend()
    yield
    _accel.set_backend(before)


def both(fn, *args):
    out = {}
    for name in ("numba", "numpy"):
        _accel.set_backend(name)
        out[name] = fn(*args)
    return out["numba"], out["numpy"]


def test_kernels_agree(restore_backend):
    rng = np.random.default_rng(0)
    E, nq, nb, K, C, F = 7, 6, 3, 3, 8, 11
    W = rng.random((E, nq))
    Phi = rng.standard_normal((E, nq, nb, K))
    coef = rng.standard_normal((E, nq, K, K))
    a, b = both(kernels.vol_blocks, W, Phi, coef)
    assert np.allclose(a, b, rtol=1e-13, atol=1e-13)
    fr = rng.standard_normal((E, nq, C, K))
    a, b = both(kernels.vol_residual, W, Phi, fr)
    assert np.allclose(a, b, rtol=1e-13, atol=1e-13)
    fW = rng.random((F, 4))
    fB = rng.standard_normal((F, 2, 4, nb))
    fc = rng.standard_normal((F, 4, 2, 2))
    a, b = both(kernels.fac_blocks, fW, fB, fc)
    assert np.allclose(a, b, rtol=1e-13, atol=1e-13)
    pos = rng.integers(0, 21, 200)
    vals = rng.standard_normal(200)
    a, b = both(kernels.scatter_add, 20, pos, vals)
    assert np.allclose(a, b, rtol=1e-13, atol=1e-13)


def test_residual_and_jacobian_agree(restore_backend):
    space = DgSpace(build_mesh("rectangle(0,1,0,1,2,2)"), 2)
    params = ModelParams(viscosity="ns", eta1=1e-3, eta2=5e-3, omega=1.0)
    op = get_operator(space, params)
    rng = np.random.default_rng(1)
    Uo = 0.1 * rng.standard_normal(op.N)
    Un = Uo + 0.01 * rng.standard_normal(op.N)
    r1, r2 = both(op.residual, Uo, Un, 0.01)
    assert np.abs(r1 - r2).max() <= 1e-13 * np.abs(r1).max()
    j1, j2 = both(op.jacobian, Uo, Un, 0.01)
    assert abs(j1 - j2).max() <= 1e-13 * abs(j1).max()


def test_backend_switch_validation(restore_backend):
    with pytest.raises(ValueError):
        _accel.set_backend("cuda")
    _accel.set_backend("numpy")
    assert _accel.backend() == "numpy"


@pytest.mark.parametrize("flag,expected", [("0", "numpy"), ("off", "numpy"), ("1", "numba")])
def test_environment_flag(flag, expected):
    import os
    import subprocess
    import sys
    env = dict(os.environ, QIDG_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", "from qidg import _accel; print(_accel.backend())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == expected
