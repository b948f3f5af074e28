from pathlib import Path

import numpy as np
import pytest

from vpscreen import Scenario, build_gtransform, calibrate_c_beta, extend, make_maxwellian, radial_solve
from vpscreen.solver import SolverConfig

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

# acceptance lines collected by test_acceptance and echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def report_line():
    """Record one acceptance line; returns the verdict so the test can assert on it."""

    def record(number, ok, message):
        line = f"CRITERION {number}: {'PASS' if ok else 'FAIL'} {message}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


@pytest.fixture(scope="session")
def maxwellian():
    return make_maxwellian()


@pytest.fixture(scope="session")
def ext25(maxwellian):
    return extend(maxwellian, 0.25, calibrate_c_beta(maxwellian, 0.25))


@pytest.fixture(scope="session")
def gt25(ext25):
    return build_gtransform(ext25)


@pytest.fixture(scope="session")
def radial_repulsive(gt25):
    return radial_solve(SolverConfig(), gt25, 1.0, 30.0, 2000)


@pytest.fixture(scope="session")
def radial_attractive(gt25):
    return radial_solve(SolverConfig(), gt25, -1.0, 30.0, 2000)


@pytest.fixture(scope="session")
def scenario_path():
    return lambda name: SCENARIOS / name


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def load_scenario():
    return lambda name: Scenario.load(SCENARIOS / name)
