import numpy as np
import pytest
from hypothesis import settings

from efkl import potentials
from efkl.config import RunConfig
from efkl.families import find_families
from efkl.ode1d import Grid1D, e0_profile, minimize_heteroclinic

settings.register_profile("efkl", max_examples=40, deadline=None, derandomize=True)
settings.load_profile("efkl")

# filled by the acceptance suite, echoed at the end of the run
CRITERIA = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(CRITERIA):
        terminalreporter.write_line(CRITERIA[key])


@pytest.fixture(scope="session")
def ac():
    return potentials.allen_cahn()


@pytest.fixture(scope="session")
def weps():
    return potentials.w_eps(0.4)


@pytest.fixture(scope="session")
def ac_minimizers(ac):
    """Allen-Cahn, beta = 3, L = 20 at three resolutions."""
    out = {}
    for n in (501, 1001, 2001):
        grid = Grid1D(20.0, n)
        cfg = RunConfig(beta=3.0, L=20.0, n=n)
        out[n] = minimize_heteroclinic(ac, 3.0, e0_profile(ac, 3.0, grid), cfg)
    return out


@pytest.fixture(scope="session")
def ac_min(ac_minimizers):
    return ac_minimizers[2001]


@pytest.fixture(scope="session")
def families04():
    cfg = RunConfig(potential="w_eps", eps=0.4, beta=1.0)
    return find_families(0.4, 1.0, cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
