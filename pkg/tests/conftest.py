import pytest

_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    key = marker.args
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _RESULTS[key] = report.passed


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for (number, title), ok in sorted(_RESULTS.items()):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  [{number:2d}] {title}")
