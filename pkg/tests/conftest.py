import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from canvessel import build_soliton, preset_canonical
from canvessel.suites import DEFAULT_BOXES, DEFAULT_SPECS

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def canonical():
    return preset_canonical()


@pytest.fixture(scope="session")
def solitons():
    return {name: build_soliton(spec) for name, spec in DEFAULT_SPECS.items()}


@pytest.fixture(scope="session")
def boxes():
    return dict(DEFAULT_BOXES)


@pytest.fixture
def rng():
    return np.random.default_rng(20261014)


_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_lines():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
