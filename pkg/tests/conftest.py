"""Acceptance bookkeeping: tests tagged ``@pytest.mark.criterion(n)`` roll up
into one PASS/FAIL line per criterion in the terminal summary."""

from collections import defaultdict

import pytest

CRITERIA = {
    1: "single-stage table: exact cells and Monte Carlo agreement",
    2: "prior probability of the study claim",
    3: "two-stage group sequential table",
    4: "futility design spot rows",
    5: "t degrees-of-freedom design type I error",
    6: "large-N type I error washout",
    7: "fixed p-vector worked example",
    8: "multiplicity family at reduced scale",
    9: "power-prior borrowing",
    10: "property suites",
}

_results: dict = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): counts toward acceptance criterion n")


def pytest_runtest_logreport(report):
    marks = getattr(report, "criteria", ())
    if not marks:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        for n in marks:
            _results[n].append((report.nodeid, report.outcome))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    report.criteria = tuple(m.args[0] for m in item.iter_markers("criterion"))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(CRITERIA):
        runs = _results.get(n)
        if not runs:
            tr.write_line(f"criterion {n:2d}: NOT RUN  {CRITERIA[n]}")
            continue
        failed = [nid for nid, outcome in runs if outcome != "passed"]
        status = "FAIL" if failed else "PASS"
        tr.write_line(f"criterion {n:2d}: {status}     {CRITERIA[n]} ({len(runs) - len(failed)}/{len(runs)} checks)")
        for nid in failed:
            tr.write_line(f"               failed: {nid}")
