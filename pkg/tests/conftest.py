import pytest

from geotorsion.catalog import filled_torus, glued_pair
from geotorsion.geometry import Realization
from geotorsion.torsion import invariant_vector


@pytest.fixture(scope="session")
def torus():
    return filled_torus().triangulation


@pytest.fixture(scope="session")
def torus_real(torus):
    return Realization.random(torus.vertices, 3)


@pytest.fixture(scope="session")
def torus_vector(torus, torus_real):
    return invariant_vector(torus, torus_real, (0, 1, 2))


@pytest.fixture(scope="session")
def glued_presets():
    return {p: glued_pair(p) for p in ("identity", "half-turn", "third-turn", "sixth-turn")}


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(test_acceptance.RESULTS[n])
