import sys

import numpy as np
import pytest

from gaussrep import FBM, StationaryExp, TimeGrid, sample_paths


@pytest.fixture(scope="session")
def fbm():
    return FBM(0.75)


@pytest.fixture(scope="session")
def sexp():
    return StationaryExp(0.75)


@pytest.fixture(scope="session")
def grid_1k():
    return TimeGrid.uniform(1.0, 1024)


@pytest.fixture(scope="session")
def fbm_paths(fbm, grid_1k):
    return sample_paths(fbm, grid_1k, 40, seed=123)


def linear(grid, slope=1.0):
    from gaussrep import GridFunction

    return GridFunction(grid, slope * np.asarray(grid.points))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.REPORT:
        terminalreporter.section("acceptance criteria")
        for line in mod.REPORT:
            terminalreporter.write_line(line)
