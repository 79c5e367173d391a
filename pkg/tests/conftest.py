import numpy as np
import pytest

from featgrad import kernels

_CRITERIA = []

BACKENDS = ["numpy"] + (["cython"] if kernels.BACKEND == "cython" else [])


@pytest.fixture(params=BACKENDS)
def backend(request):
    return kernels.get_backend(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def criterion():
    """Record a pass/fail line for the acceptance summary.

    Usage: ``criterion(number, title, passed, detail)``; the test should then
    assert ``passed`` itself so pytest's verdict and the summary agree.
    ``passed=None`` records a skipped criterion.
    """

    def record(number, title, passed, detail=""):
        _CRITERIA.append((number, title, passed if passed is None else bool(passed), detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(_CRITERIA, key=lambda r: r[0]):
        status = "SKIP" if passed is None else "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {number}: {title} -- {detail}")
