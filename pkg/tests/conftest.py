from __future__ import annotations

from dataclasses import dataclass

import pytest


@dataclass
class CriterionLine:
    number: int
    title: str
    passed: bool
    detail: str


_LINES: list[CriterionLine] = []


@pytest.fixture
def criterion():
    """Record one acceptance verdict; the summary prints one line per criterion."""

    def record(number: int, title: str, passed: bool, detail: str) -> None:
        _LINES.append(CriterionLine(number, title, bool(passed), detail))

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(_LINES, key=lambda c: c.number):
        verdict = "PASS" if line.passed else "FAIL"
        terminalreporter.write_line(f"[{verdict}] criterion {line.number:2d} {line.title}: {line.detail}")
