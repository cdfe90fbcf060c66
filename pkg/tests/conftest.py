from __future__ import annotations

import pytest

_LINES: list[str] = []


class Verdicts:
    """Collects one pass/fail line per acceptance criterion."""

    def record(self, name: str, ok: bool, detail: str) -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
        _LINES.append(line)
        print(line)


@pytest.fixture(scope="session")
def verdicts():
    return Verdicts()


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
