import numpy as np
import pytest

from mtbounds.family import make_finite_family

_acceptance = {}


@pytest.fixture
def pair():
    return make_finite_family(None, None, [[0.6, 0.4], [0.4, 0.6]])


@pytest.fixture
def triple():
    """Bernoulli(0.3), Bernoulli(0.5), Bernoulli(0.7) on atoms (0, 1)."""
    return make_finite_family(None, None, [[0.7, 0.3], [0.5, 0.5], [0.3, 0.7]])


@pytest.fixture
def point_masses():
    return make_finite_family(None, None, [[1.0, 0.0], [0.0, 1.0]])


@pytest.fixture
def rng():
    return np.random.default_rng(20261018)


def pytest_runtest_logreport(report):
    if "test_acceptance.py" in report.nodeid and report.when == "call":
        _acceptance[report.nodeid] = report.outcome
    elif "test_acceptance.py" in report.nodeid and report.failed:
        _acceptance[report.nodeid] = "failed"


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, outcome in _acceptance.items():
        name = nodeid.split("::")[-1]
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")
