import numpy as np
import pytest

from fluorcorr.correlations import filtered_g2
from fluorcorr.model import SensorParams, SystemParams

#: Acceptance outcomes, filled by tests/test_acceptance.py and echoed at the end of the run.
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def defaults() -> SystemParams:
    """Gamma = 10, Omega = 0.1, delta = 20, no dephasing (with the sensors below)."""
    return SystemParams(gamma_sigma=1.0, omega_drive=0.1, delta=20.0, gamma_phi=0.0)


@pytest.fixture(scope="session")
def side_sensors(defaults):
    return SensorParams(-defaults.delta, 10.0), SensorParams(defaults.delta, 10.0)


@pytest.fixture(scope="session")
def default_traces(defaults, side_sensors):
    """Side-peak cross-correlations at f = 0 and f = 1 on the default delay grid."""
    tau = np.linspace(-10.0, 10.0, 1001)
    return {f: filtered_g2(defaults, *side_sensors, f, tau) for f in (0.0, 1.0)}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
