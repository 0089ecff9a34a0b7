import dataclasses

import numpy as np
import pytest

from rtlab.errors import DensityUnderflow, NotContracting
from rtlab.initial_data import (build_initial_data, corrector_iteration, mhd_initial_data_stub,
                                solve_auxiliary_upsilon)

TOL = 1e-10


def _l2(grid, v):
    return float(np.sqrt(grid.cell_area * np.sum(np.asarray(v, dtype=float) ** 2)))


@pytest.fixture(scope="module")
def bundles(small_setup):
    s = small_setup
    return {d: build_initial_data(d, s.eigen, s.disc, tol=TOL) for d in (1e-2, 1e-3, 1e-4)}


def test_zero_eigenvelocity_gives_zero_upsilon(small_setup):
    e = dataclasses.replace(small_setup.eigen, u=np.zeros_like(small_setup.eigen.u))
    ups, _ = solve_auxiliary_upsilon(1e-3, e, small_setup.disc)
    assert not np.any(ups)


def test_zero_density_perturbation_gives_zero_upsilon(small_setup):
    e = dataclasses.replace(small_setup.eigen, rho=np.zeros_like(small_setup.eigen.rho))
    ups, _ = solve_auxiliary_upsilon(1e-3, e, small_setup.disc)
    assert not np.any(ups)


def test_zero_source_corrector_is_zero(small_setup):
    e = dataclasses.replace(small_setup.eigen, u=np.zeros_like(small_setup.eigen.u))
    g = small_setup.disc.grid
    u_r, q_r, hist = corrector_iteration(1e-3, e, np.zeros(g.n_faces), small_setup.disc)
    assert not np.any(u_r) and not np.any(q_r) and len(hist) == 1


def test_corrector_contracts(bundles):
    b = bundles[1e-3]
    assert b.iterations <= 8
    ratios = [h["ratio"] for h in b.iterates_log[1:]]
    assert ratios and max(ratios) <= 0.5
    assert b.iterates_log[-1]["difference"] <= TOL


def test_corrector_uniformly_bounded(bundles):
    peaks = [np.abs(b.u_r).max() for b in bundles.values()]
    assert max(peaks) / min(peaks) <= 1.2


@pytest.mark.parametrize("delta", [1e-2, 1e-3, 1e-4])
def test_corrected_residual_small(bundles, delta):
    r = bundles[delta].residuals
    assert r["interior_residual"] <= 10 * TOL * delta**2
    assert r["boundary_residual"] <= 10 * TOL * delta**2
    assert r["divergence_u0"] < 1e-12


def test_raw_residual_much_larger(small_setup, bundles):
    raw = build_initial_data(1e-3, small_setup.eigen, small_setup.disc, correct=False)
    assert raw.iterations == 0 and not raw.corrected
    assert raw.residuals["interior_residual"] > 1e4 * bundles[1e-3].residuals["interior_residual"]


def test_raw_residual_is_second_order(small_setup):
    s = small_setup
    r = [build_initial_data(d, s.eigen, s.disc, correct=False).residuals["interior_residual"]
         for d in (1e-2, 1e-3)]
    assert np.log10(r[0] / r[1]) == pytest.approx(2.0, abs=0.05)


def test_upsilon_is_second_order(bundles, small_setup):
    g = small_setup.disc.grid
    n = [_l2(g, bundles[d].upsilon) for d in (1e-2, 1e-3, 1e-4)]
    assert np.log10(n[0] / n[1]) == pytest.approx(2.0, abs=0.05)
    assert np.log10(n[1] / n[2]) == pytest.approx(2.0, abs=0.05)


def test_bundle_close_to_eigen_data(bundles, small_setup):
    g = small_setup.disc.grid
    e = small_setup.eigen
    for d, b in bundles.items():
        gap = _l2(g, np.asarray(b.u0, dtype=float) - d * e.u)
        assert gap <= 2 * d * d * _l2(g, b.u_r)
        assert np.array_equal(np.asarray(b.rho0, dtype=float), d * e.rho)


def test_positivity(bundles, small_setup):
    for b in bundles.values():
        assert b.residuals["min_total_density"] > 0
    with pytest.raises(DensityUnderflow):
        build_initial_data(50.0, small_setup.eigen, small_setup.disc)


def test_corrector_failure_is_reported(small_setup):
    # too few iterations for the requested tolerance
    with pytest.raises(NotContracting):
        build_initial_data(1e-3, small_setup.eigen, small_setup.disc, tol=1e-14, max_iter=2)


def test_bad_delta(small_setup):
    with pytest.raises(ValueError):
        build_initial_data(0.0, small_setup.eigen, small_setup.disc)


def test_mhd_stub(small_setup):
    s = small_setup
    raw = build_initial_data(1e-3, s.eigen, s.disc, correct=False)
    b0 = mhd_initial_data_stub(1e-3, s.eigen, s.disc, 0.0)
    assert b0.residuals["interior_residual"] == raw.residuals["interior_residual"]
    b = mhd_initial_data_stub(1e-3, s.eigen, s.disc, 0.8)
    assert b.residuals["div_N0"] < 1e-12
    assert b.residuals["magnetic_wall_residual"] > 0
