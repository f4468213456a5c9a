from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_criteria: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(number, title): acceptance criterion checked by this test"
    )


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            number, title = mark.args
            _criteria.setdefault(number, {"title": title, "outcomes": []})


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number = mark.args[0]
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _criteria[number]["outcomes"].append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        entry = _criteria[number]
        outcomes = entry["outcomes"]
        if not outcomes:
            status = "NOT RUN"
        elif "failed" in outcomes:
            status = "FAIL"
        elif all(o == "skipped" for o in outcomes):
            status = "SKIP"
        else:
            status = "PASS"
        terminalreporter.write_line(f"criterion {number:>2}: {status:<7} {entry['title']}")
