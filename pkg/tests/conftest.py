"""Acceptance reporting.

Tests marked ``@pytest.mark.acceptance(number, title)`` are grouped by
criterion; the terminal summary prints one PASS/FAIL line per criterion
(FAIL if any test of that criterion failed or errored).
"""
import pytest

_RESULTS = {}


def _key(number):
    return (0, number, "") if isinstance(number, int) else (1, 0, str(number))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    number, title = mark.args
    entry = _RESULTS.setdefault(number, {"title": title, "ok": True, "seen": False})
    if rep.when == "call" or rep.failed:
        entry["seen"] = True
    if rep.failed:
        entry["ok"] = False


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS, key=_key):
        entry = _RESULTS[number]
        if not entry["seen"]:
            status = "SKIP"
        else:
            status = "PASS" if entry["ok"] else "FAIL"
        terminalreporter.write_line(f"ACCEPTANCE {number} {status} {entry['title']}")
