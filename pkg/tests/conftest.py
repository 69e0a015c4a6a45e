import numpy as np
import pytest

from aoimec.config import RunConfig, WorldConfig, LearnConfig


class FixedDraws:
    """Stand-in RNG returning preset uniforms from ``random()``."""

    def __init__(self, *values):
        self.values = list(values)

    def random(self):
        return self.values.pop(0)


@pytest.fixture
def table2():
    """Physics constants of the full-size profile with a single MU."""
    return WorldConfig(num_mus=1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def report(number, passed, detail):
    """Record and print one acceptance verdict line."""
    line = f"criterion {number:>4}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
