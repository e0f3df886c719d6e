import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

ACCEPTANCE_RESULTS = {}


def record_acceptance(criterion, passed, detail):
    ACCEPTANCE_RESULTS[criterion] = (passed, detail)


@pytest.fixture
def acceptance():
    return record_acceptance


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[criterion]
        terminalreporter.write_line(
            f"{'PASS' if passed else 'FAIL'}  criterion {criterion}: {detail}")
