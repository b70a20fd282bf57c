import re

import numpy as np
import pytest

ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def criterion():
    """``emit(number, title, ok, detail)`` prints one PASS/FAIL line and keeps it for the summary."""

    def emit(number: int, title: str, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'}  criterion {number:2d}  {title}: {detail}"
        print(line)
        ACCEPTANCE_LINES[number] = line

    return emit


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
    passed = sum(bool(re.match("PASS", line)) for line in ACCEPTANCE_LINES.values())
    terminalreporter.write_line(f"{passed}/{len(ACCEPTANCE_LINES)} criteria passed")
