import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rtlab.errors import BadSpec, NonPositiveDensity
from rtlab.profiles import (
    PhysicalParams,
    check_rt_condition,
    equilibrium_pressure,
    load_tabulated_csv,
    make_profile,
    profile_from_config,
)


def test_affine_profile_has_unit_slope():
    p = make_profile("affine", [1.0, 1.0], 1.0)
    z = np.linspace(0, 1, 11)
    np.testing.assert_allclose(p.drho(z), 1.0)
    np.testing.assert_allclose(p.rho(z), 1 + z)


def test_negative_density_rejected():
    with pytest.raises(NonPositiveDensity):
        make_profile("affine", [1.0, -2.0], 1.0)


def test_exponential_derivative():
    p = make_profile("exponential", [2.0], 1.0)
    assert p.drho(0.5) == pytest.approx(2 * np.e)


@pytest.mark.parametrize("family,params", [("affine", [1.0]), ("tanh-step", [1.0, 2.0]), ("nonsense", [1.0])])
def test_malformed_spec(family, params):
    with pytest.raises(BadSpec):
        make_profile(family, params, 1.0)


def test_nonpositive_height():
    with pytest.raises(BadSpec):
        make_profile("affine", [1.0, 1.0], 0.0)


def test_rt_condition():
    assert check_rt_condition(make_profile("affine", [1.0, 1.0], 1.0))["satisfied"]
    assert not check_rt_condition(make_profile("affine", [2.0, -1.0], 1.0))["satisfied"]
    step = make_profile("tanh-step", [1.0, 3.0, 0.5, 0.05], 1.0)
    res = check_rt_condition(step)
    assert res["satisfied"] and res["witness"] == pytest.approx(0.5, abs=1e-3)


def test_pressure_examples():
    p = equilibrium_pressure(make_profile("affine", [1.0, 0.0], 1.0), 1.0)
    np.testing.assert_allclose(p(np.linspace(0, 1, 5)), -np.linspace(0, 1, 5), atol=1e-14)
    p = equilibrium_pressure(make_profile("affine", [1.0, 1.0], 1.0), 9.8)
    assert p(1.0) == pytest.approx(-14.7, abs=1e-12)


def test_tabulated_pressure_against_quadrature(tmp_path):
    z = np.linspace(0, 2, 41)
    rho = 1.5 + 0.5 * np.tanh(4 * (z - 1))
    path = tmp_path / "tab.csv"
    path.write_text("z,rho\n" + "\n".join(f"{a},{b}" for a, b in zip(z, rho)))
    prof = load_tabulated_csv(path)
    assert prof.height == pytest.approx(2.0)
    pbar = equilibrium_pressure(prof, 9.8)
    # composite Gauss-Legendre, exact for the piecewise cubic interpolant
    x, w = np.polynomial.legendre.leggauss(6)
    for zz in (0.3, 1.0, 1.7, 2.0):
        edges = np.unique(np.concatenate([z[z < zz], [zz]]))
        total = sum(0.5 * (b - a) * np.sum(w * prof.rho(0.5 * (a + b) + 0.5 * (b - a) * x))
                    for a, b in zip(edges[:-1], edges[1:]))
        assert pbar(np.array([zz]))[0] == pytest.approx(-9.8 * total, abs=1e-10)


def test_tabulated_from_config(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("0,1\n0.5,1.2\n1,1.5\n")
    prof = profile_from_config({"family": "tabulated", "csv": "t.csv", "height": 1.0}, tmp_path)
    assert prof.rho(0.5) == pytest.approx(1.2)


@settings(max_examples=30, deadline=None)
@given(a=st.floats(0.2, 5.0), b=st.floats(-0.15, 3.0), g=st.floats(0.1, 20.0))
def test_pressure_monotone_decreasing(a, b, g):
    prof = make_profile("affine", [a, b * a], 1.0)
    z = np.linspace(0, 1, 50)
    assert np.all(np.diff(equilibrium_pressure(prof, g)(z)) < 0)


@settings(max_examples=30, deadline=None)
@given(lo=st.floats(0.5, 3.0), hi=st.floats(0.5, 3.0), c=st.floats(0.2, 0.8), w=st.floats(0.02, 0.3))
def test_accepted_profiles_are_positive(lo, hi, c, w):
    prof = make_profile("tanh-step", [lo, hi, c, w], 1.0)
    assert prof.min_density() > 0


def test_physical_params_validation():
    with pytest.raises(BadSpec):
        PhysicalParams(mu=0.0, g=1.0)
    with pytest.raises(BadSpec):
        PhysicalParams(mu=1.0, g=1.0, lam=0.0, M3=1.0)
