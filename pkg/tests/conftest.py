import pytest

from intphase.core import strontium88

K_MZ = 1.54586e7
G0 = 9.81


@pytest.fixture(scope="session")
def sr():
    return strontium88()


def rel(a, b):
    return abs(a - b) / abs(b) if b else abs(a)


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "acceptance_lines", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
