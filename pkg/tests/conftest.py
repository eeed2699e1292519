import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cosmo.eventlog import log_from_sequences


def make_log(sequences, step_seconds=60.0):
    """Log from [(case_id, [activities])] with evenly spaced timestamps."""
    return log_from_sequences([
        (case_id, [(act, i * step_seconds) for i, act in enumerate(acts)])
        for case_id, acts in sequences
    ])


ACCEPTANCE_RESULTS = []


def record_criterion(number: int, description: str, passed: bool) -> None:
    ACCEPTANCE_RESULTS.append((number, description, passed))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, description, passed in sorted(ACCEPTANCE_RESULTS):
        verdict = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{verdict}] criterion {number}: {description}")


@pytest.fixture
def tiny_log():
    return make_log([
        ("c1", ["A", "B", "C"]),
        ("c2", ["A", "C", "B"]),
        ("c3", ["B", "A", "C"]),
    ])
