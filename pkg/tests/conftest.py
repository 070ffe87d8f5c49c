import pytest

_outcomes = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    rep = (yield).get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    num, title = mark.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    prev = _outcomes.get(num)
    if rep.when == "call" or (rep.failed and prev is None):
        _outcomes[num] = (title, rep.passed and rep.when == "call", detail)
    elif rep.when == "setup" and rep.skipped:
        _outcomes[num] = (title, False, "skipped")


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(_outcomes):
        title, ok, detail = _outcomes[num]
        tr.write_line(f"{'PASS' if ok else 'FAIL'} criterion {num:>2} {title}: {detail}")
