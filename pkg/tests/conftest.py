"""Collects one pass/fail line per acceptance criterion for the terminal summary."""

import pytest

_CRITERIA = {}


@pytest.fixture
def criterion():
    """Call ``criterion(n, ok, detail)`` to record the outcome of acceptance criterion ``n``."""

    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        _CRITERIA[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[number])
