import pytest

_RESULTS = {}


def pytest_runtest_logreport(report):
    marks = dict(report.user_properties)
    if "criterion" not in marks:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _RESULTS[marks["criterion"]] = (marks["title"], report.outcome, marks.get("detail", ""))


@pytest.hookimpl(tryfirst=True)
def pytest_runtest_setup(item):
    m = item.get_closest_marker("criterion")
    if m is not None:
        item.user_properties.append(("criterion", m.args[0]))
        item.user_properties.append(("title", m.args[1]))


@pytest.fixture
def detail(request):
    """Attach a one-line measurement summary to the acceptance report."""

    def record(text):
        request.node.user_properties.append(("detail", text))

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        title, outcome, text = _RESULTS[n]
        flag = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {n:2d} {flag}: {title}: {text}")
