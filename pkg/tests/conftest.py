import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from twistflow.torus import make_torus

settings.register_profile("twistflow", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("twistflow")


@pytest.fixture(scope="session")
def geom():
    return make_torus(1j, 32)


@pytest.fixture(scope="session")
def geom64():
    return make_torus(1j, 64)


@pytest.fixture(scope="session")
def skew_geom():
    return make_torus(0.3 + 1.2j, 32)


def plane_wave(geom, j, k):
    s, t = geom.st
    return np.exp(2j * np.pi * (j * s + k * t))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "LINES", None):
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(mod.LINES):
        terminalreporter.write_line(mod.LINES[cid])
