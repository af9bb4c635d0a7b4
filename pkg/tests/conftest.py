from typing import List, Tuple

import pytest

ACCEPTANCE: List[Tuple[str, bool, str]] = []


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion."""

    def record(label: str, ok: bool, detail: str) -> None:
        ACCEPTANCE.append((label, ok, detail))
        print(f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
