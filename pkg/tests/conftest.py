import os
import sys

import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, os.path.join(ROOT, "scripts"))

_criteria = {}


def record_criterion(number, title, passed, summary):
    _criteria[number] = (title, passed, summary)


@pytest.fixture
def criterion_log():
    return record_criterion


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        title, passed, summary = _criteria[n]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {n:2d} {title}: {summary}")
