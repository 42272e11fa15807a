import random

import pytest

from ambigtrace.group import LARGE, TOY, CountingGroup


@pytest.fixture
def toy():
    return TOY


@pytest.fixture
def large():
    return LARGE


@pytest.fixture
def counting_toy():
    return CountingGroup(TOY)


@pytest.fixture
def rng():
    return random.Random(20201015)


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one acceptance line; asserts after recording so failures still print."""

    def record(number, title, ok, detail=""):
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {title}: {detail}")
        assert ok, f"criterion {number} failed: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(".")[0].split()[-1])):
            terminalreporter.write_line(line)
