"""Collects acceptance outcomes and prints one line per criterion at the end of the run."""

import pytest

_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


def pytest_runtest_logreport(report):
    marker = _CRITERIA.get(report.nodeid)
    if marker is None:
        return
    if report.when == "call" or report.outcome != "passed":
        marker["outcome"] = report.outcome if marker.get("outcome") in (None, "passed") else marker["outcome"]


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            number, title = mark.args
            _CRITERIA[item.nodeid] = {"number": number, "title": title, "outcome": None}


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    by_number: dict = {}
    for entry in _CRITERIA.values():
        slot = by_number.setdefault(entry["number"], {"title": entry["title"], "ok": True, "ran": False})
        if entry["outcome"] is not None:
            slot["ran"] = True
            slot["ok"] &= entry["outcome"] == "passed"
    terminalreporter.section("acceptance criteria")
    for number in sorted(by_number):
        slot = by_number[number]
        status = ("PASS" if slot["ok"] else "FAIL") if slot["ran"] else "NOT RUN"
        terminalreporter.write_line(f"criterion {number}: {status}  {slot['title']}")
