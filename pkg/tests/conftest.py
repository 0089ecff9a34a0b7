import numpy as np
import pytest

from rtlab.experiments import ExperimentConfig, setup_mode
from rtlab.geometry import BOX, Geometry
from rtlab.profiles import PhysicalParams, make_profile


@pytest.fixture(scope="session")
def ref_profile():
    return make_profile("affine", [1.0, 1.0], 1.0)


@pytest.fixture(scope="session")
def stable_profile():
    return make_profile("affine", [2.0, -1.0], 1.0)


@pytest.fixture(scope="session")
def ref_params():
    return PhysicalParams(mu=0.1, g=9.8)


@pytest.fixture(scope="session")
def ref_cfg():
    return ExperimentConfig()


@pytest.fixture(scope="session")
def ref_setup(ref_cfg):
    return setup_mode(ref_cfg)


@pytest.fixture(scope="session")
def small_setup():
    return setup_mode(ExperimentConfig(nx=16, nz=16, spectral_n=10))


@pytest.fixture(scope="session")
def box_geom():
    return Geometry(BOX, 1.0, 1.0, 16, 16)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance bookkeeping: one PASS/FAIL line per criterion at the end of the run
_criteria: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and not rep.failed):
        return
    n = mark.args[0]
    entry = _criteria.setdefault(n, {"ok": True, "notes": []})
    entry["ok"] &= rep.passed
    entry["notes"] += [v for k, v in item.user_properties if k == "detail" and rep.when == "call"]


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        e = _criteria[n]
        line = f"criterion {n}: {'PASS' if e['ok'] else 'FAIL'}"
        if e["notes"]:
            line += "  " + "; ".join(e["notes"])
        terminalreporter.write_line(line)
