import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

ACCEPTANCE = []  # (criterion, passed, detail), filled by test_acceptance


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
