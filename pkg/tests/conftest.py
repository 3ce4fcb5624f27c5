import numpy as np
import pytest

from fracbvp.clifford import _grades


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_mv(rng, n, size=None, even=False):
    shape = (1 << n,) if size is None else (size, 1 << n)
    a = rng.normal(size=shape)
    if even:
        a = np.where(_grades(n) % 2 == 0, a, 0.0)
    return a


def rel_err(a, b):
    a, b = np.asarray(a), np.asarray(b)
    scale = max(1.0, float(np.max(np.abs(b))))
    return float(np.max(np.abs(a - b))) / scale


# PASS/FAIL lines of the acceptance suite, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
