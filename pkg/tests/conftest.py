import pytest

_VERDICTS: list[tuple[str, bool, str]] = []


@pytest.fixture
def verdict():
    """Record ``(criterion, passed, detail)`` for the end-of-run summary, then assert."""

    def record(name: str, ok: bool, detail: str):
        _VERDICTS.append((name, bool(ok), detail))
        print(f"{name}: {'PASS' if ok else 'FAIL'} | {detail}")
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in sorted(_VERDICTS, key=lambda v: v[0]):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
