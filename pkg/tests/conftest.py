import math

import numpy as np
import pytest

from edlab.catalog import make_baker, make_circle_flow

SQRT3_2 = math.sqrt(3.0) / 2.0


@pytest.fixture
def circle05():
    return make_circle_flow(0.5)


@pytest.fixture
def circle2():
    return make_circle_flow(2.0)


@pytest.fixture
def baker():
    return make_baker(0.5)


@pytest.fixture
def baker025():
    return make_baker(0.25)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    """Record and print one PASS/FAIL line, then assert it."""

    def record(label: str, ok: bool, detail: str) -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
        _VERDICTS.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
