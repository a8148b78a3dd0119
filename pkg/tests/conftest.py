import pytest
from hypothesis import HealthCheck, settings

from .oracles import random_instance

settings.register_profile("repo", deadline=None, derandomize=True,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much])
settings.load_profile("repo")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def small_instance():
    return random_instance(7, v=2, r=2, rows=2)


@pytest.fixture(scope="session")
def make_instance():
    return random_instance
