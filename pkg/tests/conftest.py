import pytest

_LINES = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance line; the line reads FAIL unless the test body completes."""
    state = {}

    def report(number, text):
        state["number"], state["text"] = number, text
        _LINES[number] = f"criterion {number}: FAIL  {text}"

    yield report
    rep = getattr(request.node, "rep_call", None)
    if "number" in state and rep is not None and rep.passed:
        _LINES[state["number"]] = f"criterion {state['number']}: PASS  {state['text']}"


@pytest.hookimpl(hookwrapper=True, tryfirst=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_LINES):
            terminalreporter.write_line(_LINES[k])
