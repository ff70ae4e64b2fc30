import numpy as np
import pytest

from qfpd.fpd import NoiseIdealSpec
from qfpd.lindblad import build_generators, preset, projector_row

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def spin_gen():
    return build_generators(preset("spin_half", 0.1))


@pytest.fixture(scope="session")
def lambda_gen():
    return build_generators(preset("lambda_type", 0.9))


@pytest.fixture
def spin_spec():
    return NoiseIdealSpec(sigma=1e-10, g=np.array([[1e-6]]), g_r=np.array([[1e-5]]),
                          omega=np.array([[10.0]]), u_r=np.array([1.0]), o_d=np.array([1.0]),
                          d=projector_row([1, 0]))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def acceptance_report():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
