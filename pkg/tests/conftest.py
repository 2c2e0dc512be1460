"""Prints one PASS/FAIL line per acceptance criterion at the end of the run."""

from __future__ import annotations

import pytest

_criteria: dict[int, dict] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (report.when != "call" and not report.failed and not report.skipped):
        return
    n, title = marker.args
    entry = _criteria.setdefault(n, {"title": title, "failed": False, "skipped": False, "seconds": 0.0})
    entry["seconds"] += report.duration
    entry["failed"] |= report.failed
    entry["skipped"] |= report.skipped


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        e = _criteria[n]
        status = "FAIL" if e["failed"] else "SKIP" if e["skipped"] else "PASS"
        terminalreporter.write_line(f"criterion {n}: {status}  {e['title']}  ({e['seconds']:.1f} s)")
