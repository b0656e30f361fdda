import re

import numpy as np
import pytest

from carleman_newton.grid import Grid2D
from carleman_newton.time_basis import build_basis, stiffness

T = 1.5


@pytest.fixture(scope="session")
def basis35():
    return build_basis(T, 3000, 35)


@pytest.fixture(scope="session")
def small_basis():
    return build_basis(T, 200, 4)


@pytest.fixture
def unit_grid():
    return Grid2D.square(1.0, 11)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_S(small_basis):
    return stiffness(small_basis)


# One line per acceptance criterion, echoed in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_report():
    def report(label: str, passed: bool, detail: str) -> bool:
        ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'} {label}: {detail}")
        return passed

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(re.search(r"criterion (\d+)", s).group(1))):
            terminalreporter.write_line(line)
