import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from sharpmax.funcrep import make_plf

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES: dict[int, str] = {}


def record_acceptance(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])


@pytest.fixture
def tent():
    return make_plf([-1.0, 0.0, 1.0], [0.0, 1.0, 0.0], 1)


@pytest.fixture
def ramp_indicator():
    eps = 1e-4
    return make_plf([-1.0 - eps, -1.0, 1.0, 1.0 + eps], [0.0, 1.0, 1.0, 0.0], 1)
