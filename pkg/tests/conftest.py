import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_CRITERIA = []


@pytest.fixture
def criterion():
    """Record one acceptance line; printed in the terminal summary."""

    def record(number, name, ok, detail=""):
        _CRITERIA.append((number, name, bool(ok), detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, ok, detail in sorted(_CRITERIA, key=lambda c: c[0]):
        status = "PASS" if ok else "FAIL"
        line = f"[{status}] criterion {number}: {name}"
        if detail:
            line += f" -- {detail}"
        terminalreporter.write_line(line)
