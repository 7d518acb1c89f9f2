from __future__ import annotations

import numpy as np
import pytest

from caa import _backend

BACKENDS = _backend.available()


@pytest.fixture(params=sorted(BACKENDS))
def backend(request):
    """Each importable kernel module in turn."""
    return BACKENDS[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# Acceptance results are collected here and printed once at the end of the
# run, so the pass/fail table is visible even with output capturing on.
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    def _report(criterion: str, passed: bool, detail: str) -> bool:
        line = f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
