import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def two_point():
    from maxmart.measures import AtomicMeasure

    return AtomicMeasure.from_pairs([(-1.0, 0.5), (1.0, 0.5)])


@pytest.fixture
def uniform_1000():
    from maxmart.measures import AtomicMeasure

    return AtomicMeasure.uniform(-1.0, 1.0, 1000)


def centered(xs, ws):
    """Atomic measure from raw locations and weights, shifted to mean zero."""
    from maxmart.measures import AtomicMeasure

    x = np.unique(np.asarray(xs, float))
    w = np.asarray(ws[: x.size], float)
    w = w / w.sum()
    return AtomicMeasure(x - np.dot(x, w), w)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
