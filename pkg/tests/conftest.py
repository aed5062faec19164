import sys

import pytest
from hypothesis import HealthCheck, settings

from tesae import data

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def boolean():
    return data.boolean_grammar()


@pytest.fixture(scope="session")
def expressions():
    return data.expressions_grammar()


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    lines = getattr(acceptance, "RESULTS", {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for key in sorted(lines):
            terminalreporter.write_line(lines[key])
