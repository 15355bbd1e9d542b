"""Collects acceptance verdict lines and replays them after the run."""

from __future__ import annotations

import pytest

_LINES: dict[int, str] = {}


def _record(index: int, ok: bool, text: str) -> None:
    word = "PASS" if ok else "FAIL"
    _LINES[index] = f"{word} criterion {index:2d}: {text}"
    print(_LINES[index])


@pytest.fixture(scope="session")
def criterion():
    """Recorder tests call as criterion(index, ok, text)."""
    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _LINES:
        return
    terminalreporter.section("acceptance")
    for idx in sorted(_LINES):
        terminalreporter.write_line(_LINES[idx])
