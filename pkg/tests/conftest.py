from __future__ import annotations

from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from slotfill.model import load_annotated
from slotfill.registry import SlotRegistry

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def registry() -> SlotRegistry:
    return SlotRegistry.load(FIXTURES / "registry.json")


@pytest.fixture(scope="session")
def corpus():
    items, diagnostics = load_annotated(FIXTURES / "annotated.jsonl")
    assert not diagnostics
    return items


@pytest.fixture(scope="session")
def worked_dialogue(corpus):
    return next(d for d in corpus if d.id == "telecom-1")


@pytest.fixture(scope="session")
def shared_registry() -> SlotRegistry:
    """Read-only registry for property tests; never mutate it."""
    return SlotRegistry.load(FIXTURES / "registry.json")


# acceptance reporting: one line per criterion in the terminal summary

_CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Call ``criterion(n, ok, detail)`` to record one acceptance line, then assert ``ok``."""

    def record(number: int, ok: bool, detail: str) -> None:
        _CRITERIA[number] = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[number])
