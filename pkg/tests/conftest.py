"""Prints one PASS / FAIL line per acceptance criterion at the end of the run."""

import pytest

_results: dict[int, tuple[str, bool]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and rep.passed):
        return
    n, title = mark.args
    ok = rep.passed and _results.get(n, (title, True))[1]
    _results[n] = (title, ok)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_results):
        title, ok = _results[n]
        tr.write_line(f"{'PASS' if ok else 'FAIL'}  {n:2d}  {title}")
    tr.write_line(f"{sum(ok for _, ok in _results.values())}/{len(_results)} criteria passed")
