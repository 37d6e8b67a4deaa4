"""Shared fixtures; collects acceptance verdicts and prints one line per criterion."""
from __future__ import annotations

from collections import defaultdict

import pytest

_VERDICTS: dict[int, list[tuple[bool, str]]] = defaultdict(list)


@pytest.fixture
def acceptance():
    """``acceptance(criterion, passed, detail)`` records one check for the summary."""

    def record(criterion: int, passed: bool, detail: str) -> bool:
        _VERDICTS[criterion].append((bool(passed), detail))
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in range(1, max(11, *_VERDICTS) + 1):
        checks = _VERDICTS.get(criterion)
        if not checks:
            terminalreporter.write_line(f"criterion {criterion}: FAIL - not evaluated (errored or deselected)")
            continue
        ok = all(passed for passed, _ in checks)
        detail = "; ".join(d if passed else f"FAILED {d}" for passed, d in checks)
        terminalreporter.write_line(f"criterion {criterion}: {'PASS' if ok else 'FAIL'} - {detail}")
