"""Acceptance run: each test is tagged with the criterion it checks.

A summary with one PASS/FAIL line per criterion is printed at the end of
the session.  The heavy experiments run once per module.
"""

import math
import subprocess
import sys
import time
import warnings

import numpy as np
import pytest

from rtlab.errors import RegimeViolation
from rtlab.experiments import (ExperimentConfig, error_scaling_experiment, escape_time_experiment,
                               gronwall_property_check, mhd_threshold_experiment, setup_mode)
from rtlab.geometry import BOX, LAYER, Geometry
from rtlab.initial_data import build_initial_data
from rtlab.nonlinear_sim import FieldState, run
from rtlab.normal_modes import (alpha, box_growth_rate, max_over_wavenumbers, solve_growth_rate)
from rtlab.profiles import PhysicalParams, make_profile

from test_stokes import stokes_orders

criterion = pytest.mark.criterion
CFG = ExperimentConfig()
PROF = make_profile("affine", [1.0, 1.0], 1.0)
PARAMS = PhysicalParams(mu=0.1, g=9.8)


def note(record_property, text):
    record_property("detail", text)


@pytest.fixture(scope="module")
def setup():
    return setup_mode(CFG)


# 1 ---------------------------------------------------------------------------
@criterion(1)
def test_spectral_self_consistency(record_property):
    geom = Geometry(LAYER, nz=CFG.spectral_n)
    bound = PARAMS.g * PROF.max_buoyancy_ratio()
    t0 = time.perf_counter()
    worst = 0.0
    for k in CFG.k_grid:
        m = solve_growth_rate(k, PROF, PARAMS, geom)
        res = abs(m.rate**2 - alpha(m.rate, k, PROF, PARAMS, geom)[0])
        worst = max(worst, res)
        assert m.rate > 0
        assert res <= 1e-8
        assert m.rate**2 <= bound
    elapsed = time.perf_counter() - t0
    note(record_property, f"max |L^2 - alpha(L)| = {worst:.1e} over {len(CFG.k_grid)} wavenumbers, {elapsed:.2f} s")
    assert elapsed < 5.0


# 2 ---------------------------------------------------------------------------
@criterion(2)
def test_layer_reduction_matches_box():
    n = 16
    layer = max_over_wavenumbers(np.linspace(3, 7, 41), PROF, PARAMS, Geometry(LAYER, nz=n))["Lambda_star"]
    box = box_growth_rate(PROF, PARAMS, Geometry(BOX, 4.0, 1.0, 2 * n, n)).rate
    assert abs(box - layer) / layer < 0.05


@criterion(2)
def test_unit_box_resolution_consistent(record_property):
    rates = [box_growth_rate(PROF, PARAMS, Geometry(BOX, 1.0, 1.0, n, n)).rate for n in (10, 16)]
    note(record_property, f"unit box rate {rates[-1]:.6f}")
    assert abs(rates[0] - rates[1]) / rates[1] < 0.05


# 3 ---------------------------------------------------------------------------
@criterion(3)
def test_linear_growth_rate(setup, record_property):
    e = setup.eigen
    t0 = time.perf_counter()
    _, rep = run(setup.disc, FieldState(0.0, e.rho, e.u, e.q), 3.0 / e.rate, CFG.dt, "linear")
    elapsed = time.perf_counter() - t0
    t = rep.t
    m = (t * e.rate >= 0.5) & (t * e.rate <= 3.0)
    slope = np.polyfit(t[m], np.log(rep.column("u_L2")[m]), 1)[0]
    note(record_property, f"slope {slope:.5f} vs spectral {setup.spectral_rate:.5f}, {elapsed:.1f} s")
    assert abs(slope - setup.spectral_rate) / setup.spectral_rate < 0.03
    assert elapsed < 60.0


# 4 ---------------------------------------------------------------------------
@pytest.fixture(scope="module")
def bundles(setup):
    return {d: build_initial_data(d, setup.eigen, setup.disc, CFG.tol) for d in (1e-3, 1e-4, 1e-5)}


@criterion(4)
def test_corrector_geometric_convergence(bundles):
    for b in bundles.values():
        ratios = [h["ratio"] for h in b.iterates_log[1:]]
        assert ratios and max(ratios) < 1.0
        assert b.iterates_log[-1]["difference"] <= CFG.tol


@criterion(4)
def test_compatibility_residuals(bundles, record_property):
    worst = 0.0
    for d, b in bundles.items():
        r = b.residuals
        worst = max(worst, r["interior_residual"] / d**2, r["boundary_residual"] / d**2)
        assert r["interior_residual"] <= 10 * CFG.tol * d**2
        assert r["boundary_residual"] <= 10 * CFG.tol * d**2
    note(record_property, f"max residual / delta^2 = {worst:.2e}")


@criterion(4)
def test_corrector_uniform(bundles, setup):
    a = setup.disc.grid.cell_area
    n = [math.sqrt(a * float(b.u_r @ b.u_r)) for b in bundles.values()]
    assert max(n) / min(n) - 1.0 < 0.2


@criterion(4)
def test_upsilon_quadratic(bundles, setup, record_property):
    a = setup.disc.grid.cell_area
    d = list(bundles)
    n = [math.sqrt(a * float(bundles[x].upsilon @ bundles[x].upsilon)) for x in d]
    slope = np.polyfit(np.log(d), np.log(n), 1)[0]
    note(record_property, f"Upsilon slope {slope:.4f}")
    assert abs(slope - 2.0) <= 0.1


# 5 ---------------------------------------------------------------------------
@pytest.fixture(scope="module")
def escape():
    t0 = time.perf_counter()
    fit = escape_time_experiment(CFG)
    return fit, time.perf_counter() - t0


@criterion(5)
def test_escape_time_law(escape, record_property):
    fit, elapsed = escape
    note(record_property, f"slope {fit.slope:.5f} vs 1/Lambda {fit.target:.5f}, R^2 {fit.r2:.6f}, {elapsed:.0f} s")
    assert all(r["crossed"] for r in fit.extra["rows"])
    assert len(fit.extra["rows"]) >= 4
    assert abs(fit.slope - fit.target) / fit.target < 0.05
    assert elapsed < 600


# 6 ---------------------------------------------------------------------------
@pytest.fixture(scope="module")
def scaling():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeViolation)
        return error_scaling_experiment(CFG)


@criterion(6)
def test_error_scaling_law(scaling, record_property):
    fits = scaling["fits"]
    summary = ", ".join(f"{k} {f.slope:.3f}" for k, f in fits.items())
    note(record_property, f"exponents: {summary}")
    assert len(fits) == 2 * len(CFG.taus)
    for key, f in fits.items():
        assert f.r2 >= 0.99, key
        assert abs(f.slope - 1.5) <= 0.1, f"{key}: exponent {f.slope:.3f}"


# 7 ---------------------------------------------------------------------------
@criterion(7)
def test_gronwall_constant_stable(record_property):
    g = gronwall_property_check(CFG)
    note(record_property, "C " + ", ".join(f"{k}={v:.4g}" for k, v in g["C"].items()))
    assert g["finite"]
    assert g["spread"] < 2.0


# 8 ---------------------------------------------------------------------------
@pytest.fixture(scope="module")
def mhd():
    return mhd_threshold_experiment(CFG)


@criterion(8)
def test_mhd_thresholds_agree(mhd, record_property):
    note(record_property, f"spectral {mhd['spectral_threshold']:.5f}, dynamical {mhd['dynamical_threshold']:.5f}")
    assert mhd["relative_gap"] < 0.05


@criterion(8)
def test_mhd_monotone_and_zero_field(mhd):
    assert mhd["spectral_monotone"]
    assert mhd["zero_field_match"] is True
    geom = Geometry(LAYER, nz=CFG.spectral_n)
    rates = [solve_growth_rate(CFG.mhd_k, PROF, PARAMS, geom, M3=m).rate for m in np.linspace(0, 0.5, 11)]
    assert all(b <= a for a, b in zip(rates, rates[1:]))


# 9 ---------------------------------------------------------------------------
@criterion(9)
def test_stokes_design_order(record_property):
    orders = stokes_orders()
    note(record_property, "Stokes orders " + ", ".join(f"{o:.2f}" for o in orders))
    assert min(orders) > 1.9


@criterion(9)
def test_divergence_every_step(setup, escape):
    b = build_initial_data(1e-3, setup.eigen, setup.disc, CFG.tol)
    _, rep = run(setup.disc, FieldState.from_bundle(b), 3.0 / setup.eigen.rate, CFG.dt, "nonlinear", every=1)
    assert rep.column("div_max").max() <= 1e-10
    assert max(r["max_div"] for r in escape[0].extra["rows"]) <= 1e-10


@criterion(9)
def test_zero_state_preserved(setup):
    for mode in ("nonlinear", "linear"):
        s, _ = run(setup.disc, FieldState.zeros(setup.disc), 0.5, CFG.dt, mode)
        assert np.abs(s.u).max() == 0 and np.abs(s.rho).max() == 0


@criterion(9)
def test_byte_identical_reruns(tmp_path):
    outs = []
    for name in ("a", "b"):
        r = subprocess.run([sys.executable, "-m", "rtlab.cli", "simulate", "--T", "0.5", "--nx", "16", "--nz", "16",
                            "--delta", "1e-3", "--every", "5", "--snapshots", "--out", str(tmp_path / name)],
                           capture_output=True, text=True)
        assert r.returncode == 0, r.stderr
        outs.append([(tmp_path / name / f).read_bytes()
                     for f in ("energy.csv", "snapshots/final_u.bin", "snapshots/final_rho.bin")])
    assert outs[0] == outs[1]


def test_difference_stays_below_three_halves_envelope(scaling):
    # the three-halves law as an upper bound: sup diff / sqrt(delta^3 e^{3 Lambda t}) shrinks with delta
    c = [scaling["bound_constant"][d] for d in CFG.deltas]
    assert all(b < a for a, b in zip(c, c[1:]))
