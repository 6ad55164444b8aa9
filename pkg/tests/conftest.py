import math

import pytest

from hybridopa.config import load_config
from hybridopa.model_params import SqueezedInput
from hybridopa.spectra import SpectrumParams


@pytest.fixture(scope="session")
def hybrid():
    return load_config("fig2c").cavity


@pytest.fixture(scope="session")
def single():
    return load_config("fig2a").cavity


def ideal_params(f, theta=math.pi, s=0.0, gamma_in=1.0, delta=0.0, omega=0.0):
    """Lossless one-port cavity with the pump pinned to f * gamma_s."""
    return SpectrumParams(delta, omega, gamma_in, 0.0, 0.0, f * gamma_in, theta, SqueezedInput(s))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
