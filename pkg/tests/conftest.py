"""Shared pytest plumbing: acceptance verdict lines are echoed in the terminal summary."""

import pytest

_VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    """``verdict(k, ok, detail)`` records one PASS/FAIL line for acceptance criterion ``k`` and asserts it."""

    def record(k: int, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}"
        _VERDICTS.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_VERDICTS, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
