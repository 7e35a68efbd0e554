import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from robustshape.grid import interpolate, piecewise_x, unit_square_mesh  # noqa: E402


@pytest.fixture(scope="session")
def mesh10():
    return unit_square_mesh(10)


@pytest.fixture(scope="session")
def mesh30():
    return unit_square_mesh(30)


@pytest.fixture(scope="session")
def mesh50():
    return unit_square_mesh(50)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def bench_source():
    return piecewise_x(1.0, 2.0, 0.5)


def ones(mesh):
    return interpolate(mesh, 1.0)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.REPORT:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.REPORT):
            terminalreporter.write_line(line)
