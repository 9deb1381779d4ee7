import logging

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fsbench.data import from_arrays
from fsbench.synthetic import make_demo, make_planted

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def demo():
    return make_demo()


@pytest.fixture(scope="session")
def planted():
    return make_planted(n_rows=600, seed=7)


@pytest.fixture
def toy():
    # 8 rows: f1 == label, f2 == 1 - label, f3 constant, f4 noise
    y = np.array([1, 1, 1, 1, 0, 0, 0, 0])
    X = np.column_stack([y, 1 - y, np.ones(8), [1, 0, 0, 1, 1, 0, 1, 0]])
    return from_arrays(X, y, name="toy")


def random_binary(rng, n, p, rate=0.5):
    X = (rng.random((n, p)) < rate).astype(float)
    y = (rng.random(n) < 0.5).astype(np.int64)
    y[0], y[1] = 0, 1
    return X, y


@pytest.fixture(autouse=True)
def _quiet_logs(caplog):
    caplog.set_level(logging.INFO)


# one line per acceptance criterion, echoed at the end of the session
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
