import contextlib
import time

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def acceptance(request):
    """Context manager recording one PASS/FAIL line for an acceptance criterion."""
    results = request.config.stash[_ACCEPTANCE]

    @contextlib.contextmanager
    def criterion(number, title):
        notes = []
        start = time.perf_counter()
        try:
            yield notes.append
        except BaseException:
            results.append((number, "FAIL", title, notes, time.perf_counter() - start))
            raise
        results.append((number, "PASS", title, notes, time.perf_counter() - start))

    return criterion


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = sorted(config.stash.get(_ACCEPTANCE, []))
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number, status, title, notes, seconds in results:
        detail = f" ({'; '.join(notes)})" if notes else ""
        terminalreporter.write_line(f"[{status}] {number}. {title} in {seconds:.1f}s{detail}")
