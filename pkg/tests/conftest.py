"""Shared pytest wiring.

Acceptance tests record one summary line each through the ``acceptance``
fixture; the lines are replayed in a dedicated section at the end of the
run so the measured values survive output capturing.
"""

import pytest

_acceptance_lines: list[str] = []


@pytest.fixture
def acceptance():
    def check(name: str, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'}  {name}  [{detail}]"
        _acceptance_lines.append(line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _acceptance_lines:
        terminalreporter.section("acceptance summary")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
