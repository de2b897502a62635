import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from shiftindex.geometry import build_base_grid, build_cosphere_grid, circle, sphere_cross_circle, torus2
from shiftindex.group_action import GOLDEN, Generator, free_abelian, trivial_group

settings.register_profile("repo", deadline=None, max_examples=30, derandomize=True,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("repo")


@pytest.fixture(scope="session")
def S1():
    return circle()


@pytest.fixture(scope="session")
def golden_group(S1):
    return free_abelian(S1, [Generator((GOLDEN,))])


@pytest.fixture(scope="session")
def trivial_circle(S1):
    return trivial_group(S1)


@pytest.fixture(scope="session")
def circle_cosphere(S1):
    return build_cosphere_grid(S1, 32)


@pytest.fixture(scope="session")
def circle_base(S1):
    return build_base_grid(S1, 32)


@pytest.fixture(scope="session")
def T2():
    return torus2()


@pytest.fixture(scope="session")
def stretch():
    return sphere_cross_circle()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, line = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {line}")
