import pytest

# criterion id -> (passed, detail); filled in by test_acceptance
VERDICTS: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def verdict():
    def record(cid, passed, detail):
        VERDICTS[cid] = (bool(passed), detail)
        print(f"{'PASS' if passed else 'FAIL'} {cid}: {detail}")
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(VERDICTS, key=lambda c: int(c[1:])):
        passed, detail = VERDICTS[cid]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} {cid}: {detail}")
