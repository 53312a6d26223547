import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from kullprox.models import CompetingRisksData, CompetingRisksParams  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def toy_m1():
    # N0 = 2, one death with tumor and one without
    return CompetingRisksData(2, [0], [1], [1], [0], [0])


@pytest.fixture
def toy_m2():
    return CompetingRisksData(20, [12, 0], [3, 2], [2, 1], [1, 4], [2, 5])


@pytest.fixture
def half():
    return CompetingRisksParams.constant(1, 0.5)


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion for the session summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        lines.append((number, line))
        print(line)
        return passed

    return record


_ACCEPTANCE = pytest.StashKey[list]()


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
