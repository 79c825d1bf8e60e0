import numpy as np
import pytest
from hypothesis import settings

from hjsc.domain import Domain
from hjsc.examples import get_case
from hjsc.solver import SolverConfig, build_grid, solve

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture(scope="session")
def interval():
    return Domain.interval(-1.0, 1.0)


def _coarse(case_id, spacing):
    case = get_case(case_id)
    grid = build_grid(case.domain, spacing)
    return case, solve(case.H, case.f, grid, SolverConfig(tol=1e-8))


@pytest.fixture(scope="session")
def e2_coarse():
    return _coarse("E2", 5e-3)


@pytest.fixture(scope="session")
def e3_coarse():
    return _coarse("E3", 5e-3)


@pytest.fixture(scope="session")
def e1_coarse():
    return _coarse("E1", 5e-3)


@pytest.fixture(scope="session")
def e5_coarse():
    return _coarse("E5", 5e-3)


@pytest.fixture
def rng():
    return np.random.default_rng(20261019)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance") or __import__("sys").modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
