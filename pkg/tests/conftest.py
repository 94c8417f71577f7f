import numpy as np
import pytest

from prodstab.lyapunov import LyapunovWeights
from prodstab.network import GridSpec, NetworkSpec, validate_network


def make_config(v=(1.0, 1.0), mu=(6.0, 4.0), l=0.5, h=0.05, cfl=1.0, T=2.0, coords="interface"):
    net = NetworkSpec(v, mu, l)
    return validate_network(net, GridSpec.from_cfl(h, cfl, max(v), T), coords=coords)


@pytest.fixture
def cfg2():
    return make_config()


@pytest.fixture
def mixed_speed_cfg():
    # unequal speeds and CFL below one on every processor
    return make_config(v=(0.8, 0.5), mu=(5.0, 3.0), l=1.0, h=0.1, cfl=0.8, T=3.0)


@pytest.fixture
def weights2():
    return LyapunovWeights.uniform(2, 0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    try:
        import test_acceptance
    except ImportError:
        return
    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(test_acceptance.RESULTS[n])
