import pytest

_RESULTS = {}


class AcceptanceLog:
    def record(self, number: int, passed: bool, detail: str) -> bool:
        _RESULTS[number] = (bool(passed), detail)
        return bool(passed)


@pytest.fixture
def acceptance():
    return AcceptanceLog()


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        passed, detail = _RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if passed else 'FAIL'} {detail}")
