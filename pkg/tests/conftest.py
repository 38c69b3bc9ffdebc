"""Acceptance reporting: one pass/fail line per criterion in the terminal summary."""

import pytest

_OUTCOMES = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
        if rep.failed and not detail:
            detail = rep.longreprtext.strip().splitlines()[-1] if rep.longreprtext else "error"
        _OUTCOMES[marker.args[0]] = ("PASS" if rep.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_OUTCOMES):
        status, detail = _OUTCOMES[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {detail}")
