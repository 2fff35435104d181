import time

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

SESSION_START = time.perf_counter()
# criterion number -> (passed, detail), filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def pytest_collection_modifyitems(session, config, items):
    # the wall-clock criterion must run after everything else
    last = [it for it in items if it.get_closest_marker("session_last")]
    rest = [it for it in items if not it.get_closest_marker("session_last")]
    items[:] = rest + last


def pytest_configure(config):
    config.addinivalue_line("markers", "session_last: run at the end of the session")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {k:2d}: {detail}")
