import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from spatialqudit.optics import OpticalGeometry

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def geom():
    return OpticalGeometry()


def random_settings(rng, dim):
    from spatialqudit.povm import LcdSettings

    thetas = rng.uniform(-np.pi / 4, np.pi / 4, dim)
    phis = np.concatenate([[0.0], rng.uniform(0, 2 * np.pi, dim - 1)])
    return LcdSettings(thetas, phis)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    def record(label, ok, detail):
        ACCEPTANCE_LINES.append(f"{label} {'PASS' if ok else 'FAIL'} {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
