import re

import pytest

VERDICTS = []


def record(number, title, ok, detail=""):
    line = f"{'PASS' if ok else 'FAIL'}  criterion {number:>2}: {title}" + (f"  [{detail}]" if detail else "")
    VERDICTS.append((number, line))
    print(line)
    return ok


@pytest.fixture
def verdict():
    return record


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    def order(v):
        num, suffix = re.match(r"(\d+)(.*)", str(v[0])).groups()
        return int(num), suffix

    for _, line in sorted(VERDICTS, key=order):
        terminalreporter.write_line(line)
