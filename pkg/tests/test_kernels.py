import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rtlab.kernels import numba_impl, numpy_impl


def _fields(rng, nx, nz, periodic):
    u = rng.standard_normal((nx if periodic else nx + 1, nz))
    w = rng.standard_normal((nx, nz + 1))
    if not periodic:
        u[0] = u[-1] = 0
    w[:, 0] = w[:, -1] = 0
    return u, w, rng.standard_normal((nx, nz))


@settings(max_examples=40, deadline=None)
@given(nx=st.integers(3, 12), nz=st.integers(3, 12), periodic=st.booleans(), seed=st.integers(0, 2**31 - 1))
def test_numba_matches_numpy(nx, nz, periodic, seed):
    rng = np.random.default_rng(seed)
    u, w, r = _fields(rng, nx, nz, periodic)
    a = numpy_impl.advect_velocity(u, w, 0.1, 0.07, periodic)
    b = numba_impl.advect_velocity(u, w, 0.1, 0.07, periodic)
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y, rtol=1e-13, atol=1e-13)
    a = numpy_impl.muscl_fluxes(r, u, w, periodic)
    b = numba_impl.muscl_fluxes(r, u, w, periodic)
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y, rtol=1e-13, atol=1e-13)


def test_advection_of_uniform_flow_is_zero():
    nx, nz = 8, 6
    u = np.ones((nx, nz))
    w = np.zeros((nx, nz + 1))
    au, aw = numpy_impl.advect_velocity(u, w, 0.1, 0.1, True)
    # the mirror ghost at the walls sees shear in the first and last rows only
    assert np.abs(au[:, 1:-1]).max() == 0 and np.abs(aw).max() == 0


def test_constant_density_flux_has_no_divergence():
    from rtlab.discrete import flux_divergence
    from rtlab.grid import MacGrid

    g = MacGrid(10, 10)
    u = g.C @ np.random.default_rng(0).standard_normal(g.n_corners)
    rho = np.full(g.n_cells, 3.0)
    assert np.abs(flux_divergence(g, rho, u)).max() < 1e-12


@pytest.mark.parametrize("flag,expected", [("0", "numpy"), ("1", "numba")])
def test_env_flag_selects_backend(flag, expected):
    env = dict(os.environ, RTLAB_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", "import rtlab.kernels as k; print(k.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == expected
