import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from conslaw.flux import Flux

settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def burgers():
    return Flux.polynomial([0, 0, 0.5], (-1, 1))


@pytest.fixture(scope="session")
def cubic():
    return Flux.polynomial([0, 0, 0, 1], (-1, 1))


@pytest.fixture(scope="session")
def linear():
    return Flux.polynomial([0, 2], (-1, 1))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for num in sorted(results):
            terminalreporter.write_line(results[num])
