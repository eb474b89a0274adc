import os
import sys

# make the oracle module importable from every test file
sys.path.insert(0, os.path.dirname(__file__))

ACCEPTANCE_LINES = {}


def record_criterion(number, passed, detail):
    """Remember one acceptance verdict and echo it immediately."""
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
