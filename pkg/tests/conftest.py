import os
import sys

import pytest

HERE = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, HERE)

ROOT = os.path.dirname(HERE)
PROGRAMS = os.path.join(ROOT, "benchmarks", "programs")
MANIFEST = os.path.join(ROOT, "benchmarks", "manifest.json")


def program_text(name: str) -> str:
    with open(os.path.join(PROGRAMS, name), encoding="utf-8") as fh:
        return fh.read()


@pytest.fixture
def prog():
    return program_text


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(lines):
        terminalreporter.write_line(lines[n])
