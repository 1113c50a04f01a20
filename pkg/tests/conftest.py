"""Shared fixtures; collects one pass/fail line per acceptance criterion."""

import time
from contextlib import contextmanager

import pytest

_LINES = pytest.StashKey[dict]()


class Outcome:
    def __init__(self):
        self.passed = False
        self.detail = ""


@pytest.fixture
def criterion(request):
    """Context manager recording the outcome of one acceptance criterion."""
    lines = request.config.stash.setdefault(_LINES, {})

    @contextmanager
    def run(number, name, budget):
        out = Outcome()
        t0 = time.perf_counter()
        try:
            yield out
        except Exception as exc:
            out.passed, out.detail = False, f"{type(exc).__name__}: {exc}"
            raise
        finally:
            elapsed = time.perf_counter() - t0
            within = elapsed <= budget
            ok = out.passed and within
            timing = f"{elapsed:.1f} s of {budget:g} s" + ("" if within else ", over budget")
            lines[number] = f"criterion {number:2d} [{'PASS' if ok else 'FAIL'}] {name}: {out.detail} ({timing})"
        assert within, f"criterion {number} exceeded its {budget:g} s budget ({elapsed:.1f} s)"

    return run


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
