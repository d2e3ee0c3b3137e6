import re

_outcomes: dict = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_criterion_(\d+)", report.nodeid)
    if not m:
        return
    k = int(m.group(1))
    if report.failed or (report.when == "call" and report.skipped):
        _outcomes[k] = "FAIL"
    elif report.when == "call" and k not in _outcomes:
        _outcomes[k] = "PASS"


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_outcomes):
        terminalreporter.write_line(f"criterion {k}: {_outcomes[k]}")
