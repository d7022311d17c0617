import sys

import numpy as np
import pytest

from quasisym.nonlin import DerivativeBundle, NonlinearitySpec


@pytest.fixture(scope="session")
def bundle_k2p5():
    return DerivativeBundle(NonlinearitySpec(k=2, p=5, N=3))


@pytest.fixture(scope="session")
def bundle_k2p5_planar():
    return DerivativeBundle(NonlinearitySpec(k=2, p=5, N=2))


@pytest.fixture(scope="session")
def radial_k2p5(bundle_k2p5):
    from quasisym.radial import Controls, RadialProblemSpec, solve_radial

    problem = RadialProblemSpec("ball", 1.0, 0.0, bundle_k2p5.spec, 0)
    return solve_radial(problem, bundle_k2p5, Controls())


@pytest.fixture(scope="session")
def planar_k2p5(bundle_k2p5_planar):
    from quasisym.planar import PlanarProblemSpec, solve_planar

    problem = PlanarProblemSpec(1.0, 1.0, 32, 16, bundle_k2p5_planar.spec)
    return solve_planar(problem, bundle_k2p5_planar)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
