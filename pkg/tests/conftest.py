import numpy as np
import pytest

from krein import LambdaGrid
from krein.experiments import ExperimentConfig, solve_weight
from krein.weights import bump_weight, gauss_weight, make_weight


@pytest.fixture(scope="session")
def default_grid():
    return LambdaGrid(128.0, 4096)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def solved_unit():
    return solve_weight(make_weight("const:c=1"), ExperimentConfig())


@pytest.fixture(scope="session")
def solved_bump():
    return solve_weight(bump_weight(0.1), ExperimentConfig())


@pytest.fixture(scope="session")
def solved_small_bump():
    return solve_weight(bump_weight(1e-3), ExperimentConfig())


@pytest.fixture(scope="session")
def solved_gauss():
    return solve_weight(gauss_weight(1e-2), ExperimentConfig())


_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_log(request):
    return request.config.stash.setdefault(_ACCEPTANCE_KEY, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[0][1:])):
            terminalreporter.write_line(line)
