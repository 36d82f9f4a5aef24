import pytest

_LINES = []


@pytest.fixture
def report():
    """Record one acceptance line: ``report(n, passed, detail)``.

    The lines are printed together at the end of the session.
    """

    def emit(n, passed, detail):
        line = f"criterion {n:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        _LINES.append((n, line))

    return emit


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_LINES):
            terminalreporter.write_line(line)
