import pytest

_CRITERIA: dict = {}


@pytest.fixture
def criterion(request):
    """report(n, ok, detail): emit a PASS/FAIL line for acceptance criterion n immediately."""
    tr = request.config.pluginmanager.get_plugin("terminalreporter")

    def report(n: int, ok: bool, detail: str) -> bool:
        line = f"CRITERION {n:2d} {'PASS' if ok else 'FAIL'}: {detail}"
        _CRITERIA[n] = line
        if tr is not None:
            tr.write_line("")
            tr.write_line(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n])
