import pytest

_VERDICTS: list[str] = []


@pytest.fixture(scope="session")
def verdict():
    """Record one ``CRITERION k: PASS|FAIL detail`` line, then assert."""

    def record(k: int, ok: bool, detail: str):
        _VERDICTS.append(f"CRITERION {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        print(_VERDICTS[-1])
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_VERDICTS, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
