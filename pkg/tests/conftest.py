import os
import re

import pytest

import acceptance_log
from github_server import FixtureServer

DATA = os.path.join(os.path.dirname(__file__), "data")


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture
def dump_a():
    return os.path.join(DATA, "issues_a.jsonl")


@pytest.fixture
def dump_b():
    return os.path.join(DATA, "issues_b.csv")


@pytest.fixture
def server():
    s = FixtureServer()
    yield s
    s.close()


_CRITERION = re.compile(r"test_criterion_(\d+)_")
_outcomes = {}


def pytest_runtest_logreport(report):
    match = _CRITERION.search(report.nodeid)
    if not match or "test_acceptance.py" not in report.nodeid:
        return
    n = int(match.group(1))
    if report.failed:
        _outcomes[n] = False
    elif report.when == "call" and n not in _outcomes:
        _outcomes[n] = report.passed


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_outcomes):
        recorded = acceptance_log.RESULTS.get(n)
        detail = recorded[1] if recorded else "did not complete"
        verdict = "PASS" if _outcomes[n] else "FAIL"
        terminalreporter.write_line(f"[{verdict}] #{n} {acceptance_log.TITLES[n]}: {detail}")
