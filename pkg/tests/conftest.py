import sys
import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from acsplit import make_basis

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def basis64():
    return make_basis(64)


@pytest.fixture(scope="session")
def basis32():
    return make_basis(32)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def band_limited(rng, basis, n=None, amp=1.0, decay=1.0):
    shape = (basis.n_modes,) if n is None else (n, basis.n_modes)
    m = np.arange(1, basis.n_modes + 1)
    return amp * rng.standard_normal(shape) / m**decay


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and getattr(mod, "LINES", None):
        terminalreporter.section("acceptance criteria")
        for line in mod.LINES:
            terminalreporter.write_line(line)
