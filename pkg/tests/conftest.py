import pytest

# one line per acceptance criterion, replayed at the end of the session
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record(request):
    """Print and remember a PASS/FAIL line for an acceptance criterion."""
    capman = request.config.pluginmanager.getplugin("capturemanager")

    def _record(number: int, ok: bool, detail: str):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        ACCEPTANCE_LINES.append(line)
        with capman.global_and_fixture_disabled():
            print(f"\n{line}", flush=True)

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
