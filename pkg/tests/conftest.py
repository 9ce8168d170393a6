import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=200)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_CRITERIA = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_CRITERIA] = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(n, passed, detail)``."""
    store = request.config.stash[_CRITERIA]

    def record(n, passed, detail):
        line = f"criterion {n:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        store[n] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash[_CRITERIA]
    if store:
        terminalreporter.write_sep("=", "acceptance criteria")
        for n in sorted(store):
            terminalreporter.write_line(store[n])
