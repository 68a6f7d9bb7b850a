"""Shared acceptance reporting.

The acceptance tests each announce their verdict through the `report`
fixture; collected lines are replayed in the terminal summary so they
are visible on a green run without -s.
"""

import pytest

_acceptance_lines: list[str] = []


@pytest.fixture
def report():
    def _report(line: str) -> None:
        full = f"ACCEPTANCE {line}"
        _acceptance_lines.append(full)
        print(f"\n{full}")
    return _report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
