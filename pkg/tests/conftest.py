import pytest

_LEDGER_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LEDGER_KEY] = []


@pytest.fixture
def criterion(request):
    """Record one acceptance verdict: criterion(number, ok, detail)."""
    lines = request.config.stash[_LEDGER_KEY]

    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LEDGER_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
