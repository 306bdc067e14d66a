import numpy as np
import pytest

from sonarpoint import kernels
from sonarpoint.signals import SonarConfig

# filled by tests/test_acceptance.py, printed at the end of the run
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def config():
    return SonarConfig()


@pytest.fixture(params=sorted(kernels.backends()))
def backend(request):
    """Run a test once per importable kernel backend."""
    prev = kernels.use_backend(request.param)
    yield request.param
    kernels.use_backend(prev)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
