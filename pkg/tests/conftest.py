from __future__ import annotations

import json
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"

# criterion id -> (title, passed, detail); filled by test_acceptance
ACCEPTANCE: dict[str, tuple[str, bool, str]] = {}


@pytest.fixture(scope="session")
def reward_cases() -> list[dict]:
    return json.loads((FIXTURES / "reward_cases.json").read_text())


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.rstrip("ab")), k)):
        title, ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {key:>3} {title}: {detail}")
