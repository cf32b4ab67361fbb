import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


def pytest_configure(config):
    config.addinivalue_line("markers", "property: fast invariant checks (run with -m property)")
    config.addinivalue_line("markers", "acceptance: exit criteria, some take many minutes")


@pytest.fixture
def rng():
    return np.random.default_rng(20150101)


_ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Collect one pass/fail line per acceptance criterion for the summary."""

    def add(criterion, passed, detail):
        _ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")
        print(_ACCEPTANCE_LINES[-1])

    return add


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
