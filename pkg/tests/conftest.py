import pytest

_VERDICTS: list[tuple[str, bool, str]] = []


@pytest.fixture
def criterion():
    """Record one acceptance verdict; returns the verdict so tests can assert on it."""
    def record(label: str, ok: bool, detail: str) -> bool:
        _VERDICTS.append((label, bool(ok), detail))
        return bool(ok)
    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in sorted(_VERDICTS, key=lambda v: int(v[0].split()[0])):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {label}: {detail}")
