import numpy as np
import pytest


def separable_set(n, seed, shift=0.15, dim=640):
    """Two Gaussian clusters at +/-shift along every axis, labels balanced at random."""
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, n)
    X = np.where(y[:, None] == 1, shift, -shift) + rng.normal(size=(n, dim))
    return X, y


def paper_stream():
    """One hour at one label per second with a two-minute scene from minute 30."""
    P = np.zeros(3600, dtype=np.int8)
    P[1800:1920] = 1
    return P


@pytest.fixture
def separable():
    X, y = separable_set(2000, seed=0)
    X_val, y_val = separable_set(500, seed=1)
    return X, y, X_val, y_val


ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(line)
