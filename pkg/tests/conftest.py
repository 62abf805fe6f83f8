import pytest

ACCEPTANCE = []


@pytest.fixture
def record():
    """Collect one pass/fail line per acceptance criterion."""

    def _record(cid, ok, detail):
        line = f"criterion {cid}: {'PASS' if ok else 'FAIL'} | {detail}"
        ACCEPTANCE.append(line)
        print(line)
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
