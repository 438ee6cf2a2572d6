import pytest

_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES] = []


@pytest.fixture
def criterion(request):
    """Run one acceptance check and log a PASS/FAIL line for the summary."""
    def run(num: int, check):
        try:
            ok, detail = check()
        except Exception as exc:  # a crash is a failure, recorded before re-raising
            request.config.stash[_LINES].append(f"criterion {num:2d}: FAIL  {type(exc).__name__}: {exc}")
            raise
        request.config.stash[_LINES].append(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok, detail
    return run


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
