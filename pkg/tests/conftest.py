import functools

import pytest
from hypothesis import HealthCheck, settings

from ifront.core import ModelParams
from ifront.profile import reconstruct
from ifront.shooting import find_alpha1

settings.register_profile(
    "ifront", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ifront")


@functools.lru_cache(maxsize=None)
def solved(d, r, c, alpha_tol=1e-8, y_max=None):
    """Shooting result for one parameter set, shared across test modules."""
    return find_alpha1(ModelParams(d, r, c), alpha_tol=alpha_tol, y_max=y_max)


@functools.lru_cache(maxsize=None)
def profile_of(d, r, c, alpha_tol=1e-8, y_max=None):
    return reconstruct(solved(d, r, c, alpha_tol, y_max).trajectory)


@pytest.fixture(scope="session")
def front_2_1_05():
    return solved(2.0, 1.0, 0.5)


@pytest.fixture(scope="session")
def profile_2_1_05():
    return profile_of(2.0, 1.0, 0.5)


def pytest_terminal_summary(terminalreporter):
    from tests import test_acceptance

    lines = getattr(test_acceptance, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
