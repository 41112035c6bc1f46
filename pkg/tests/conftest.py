import math

import pytest

from pinlab import build_power_law, build_srw_returns, from_masses

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def two_point():
    return from_masses([0.5, 0.5])


@pytest.fixture(scope="session")
def unit_step():
    return from_masses([1.0])


@pytest.fixture(scope="session")
def law03():
    return build_power_law(0.3, N_max=2**16, normalization="exact_tail")


@pytest.fixture(scope="session")
def law05():
    return build_power_law(0.5, N_max=2**16, normalization="exact_tail")


@pytest.fixture(scope="session")
def law07():
    return build_power_law(0.7, N_max=2**16, normalization="exact_tail")


@pytest.fixture(scope="session")
def srw1():
    return build_srw_returns("d1_recurrent", 2**16)


def golden_F(delta: float) -> float:
    """Closed form for K(1) = K(2) = 1/2: (x + x^2) / 2 = e^{-delta}, F = -log x."""
    x = (-1 + math.sqrt(1 + 8 * math.exp(-delta))) / 2
    return -math.log(x)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
