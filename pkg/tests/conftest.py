import sys

import pytest

from chaoslab.experiments import DEFAULT_HURST, DEFAULT_N, cmd_rates


@pytest.fixture(scope="session")
def default_table():
    """Rate table over the default (h, n) matrix, exact columns only."""
    return cmd_rates(DEFAULT_HURST, DEFAULT_N, cfg=None)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module and module.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in module.RESULTS:
            terminalreporter.write_line(line)
