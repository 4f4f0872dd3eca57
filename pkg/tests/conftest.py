import pytest

from deltadesign import builtin_pair

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def motivating():
    return builtin_pair("motivating")


@pytest.fixture(scope="session")
def enzyme():
    return builtin_pair("enzyme")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
