import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_matrix(rng, n, d, density=0.5):
    A = rng.standard_normal((n, d))
    A[rng.random((n, d)) >= density] = 0.0
    return A


# one PASS/FAIL line per acceptance criterion, printed after the run
_ACCEPTANCE = []


@pytest.fixture
def record_acceptance():
    def record(number, name, passed, detail):
        _ACCEPTANCE.append((number, name, passed, detail))

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, passed, detail in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} criterion {number:2d} {name}: {detail}")
