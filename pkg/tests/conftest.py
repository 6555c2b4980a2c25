"""Collects acceptance-criterion outcomes and prints one line per criterion."""
import pytest

_RESULTS = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    number, title, _limit = mark.args
    # a failure in any phase counts, so a runtime check in teardown also fails the criterion
    prev = _RESULTS.get(number, (title, "PASS", 0.0))
    status = "PASS" if report.outcome != "failed" and prev[1] == "PASS" else "FAIL"
    duration = prev[2] + (report.duration if report.when == "call" else 0.0)
    _RESULTS[number] = (title, status, duration)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, status, duration = _RESULTS[number]
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {title}  ({duration:.1f} s)")
