import pytest

from sram6t.cell import Technology, make_cell

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def tech():
    return Technology.default()


@pytest.fixture(scope="session")
def msc(tech):
    return make_cell(1.0, 1.0, tech=tech)


@pytest.fixture(scope="session")
def cc(tech):
    return make_cell(2.0, 1.0, tech=tech)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
