from __future__ import annotations

import numpy as np
import pytest

from arenkit.condense import condense
from arenkit.systems import double_integrator, random_stable_system, scalar_system


@pytest.fixture(scope="session")
def di_spec():
    return double_integrator()


@pytest.fixture(scope="session")
def di_qp(di_spec):
    return condense(di_spec)


@pytest.fixture(scope="session")
def scalar_qp():
    return condense(scalar_system())


@pytest.fixture(scope="session")
def random_qp():
    return condense(random_stable_system(3, seed=7))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


CRITERIA_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA_LINES:
            terminalreporter.write_line(line)
