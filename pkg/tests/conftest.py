import pytest
from hypothesis import HealthCheck, settings

from rdic.channel import SymmetricConfig, generate

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# acceptance lines collected by tests/test_acceptance.py, echoed at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def two_user_m2():
    return generate(SymmetricConfig(2, 2, 1, 1), 42)


@pytest.fixture
def three_user_m5():
    return generate(SymmetricConfig(3, 5, 1, 5), 42)
