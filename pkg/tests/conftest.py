import numpy as np
import pytest

from tumorfem import build_mesh


@pytest.fixture
def line16():
    return build_mesh("interval(0,1)", 16)


@pytest.fixture
def square5():
    return build_mesh("rectangle(0,1,0,1)", 5)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = []


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for the acceptance summary, then assert."""
    lines = request.config.stash[ACCEPTANCE]

    def record(label, ok, detail):
        lines.append(f"{'PASS' if ok else 'FAIL'} {label}: {detail}")
        assert ok, detail
    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
