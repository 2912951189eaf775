import numpy as np
import pytest
from hypothesis import settings

from mmtransit.params import default_profile

settings.register_profile("repo", deadline=None, derandomize=True, max_examples=40)
settings.load_profile("repo")


@pytest.fixture(scope="session")
def profile():
    return default_profile()


@pytest.fixture(scope="session")
def g(profile):
    return profile.globals


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, text): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when not in ("setup", "call"):
        return
    n, text = mark.args
    if rep.failed or rep.when == "call":
        prev = _CRITERIA.get(n, (text, "PASS"))[1]
        state = "FAIL" if rep.failed or prev == "FAIL" else "PASS"
        _CRITERIA[n] = (text, state)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        text, state = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d} {state}: {text}")
