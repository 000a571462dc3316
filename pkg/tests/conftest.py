import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pptedge.construction import ParamSet

settings.register_profile("pptedge", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("pptedge")

# lines printed by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_params(n: int, rng: np.random.Generator, r=None) -> ParamSet:
    a = np.r_[0.0, rng.uniform(-math.pi, math.pi, n - 1)]
    b = np.r_[rng.uniform(-math.pi, math.pi, n - 1), 0.0]
    return ParamSet(n, tuple(a), tuple(b), r)


def quartic_example_params() -> ParamSet:
    return ParamSet(4, (0.0, math.pi / 3, 2 * math.pi / 3, math.pi), (0.0,) * 4)


def cubic_example_params(angle: float) -> ParamSet:
    """alpha = (1, a, a^2), beta = (1, 1, 1) with a = e^{i angle}."""
    return ParamSet(3, (0.0, angle, 2 * angle), (0.0,) * 3)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
