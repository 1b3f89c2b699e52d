import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

_criteria = []


@pytest.fixture
def report():
    """Record one acceptance line; shown in the terminal summary."""
    def _record(number, ok, detail):
        _criteria.append((number, bool(ok), detail))
        return ok
    return _record


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in sorted(_criteria):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
