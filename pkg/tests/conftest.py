import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from qpj.config import default_config, to_reduced_units  # noqa: E402
from qpj.polarization import GridSpec, JunctionParams, build_table  # noqa: E402


@pytest.fixture(scope="session")
def cold_junction():
    return JunctionParams.symmetric(0.04)


@pytest.fixture(scope="session")
def hot_junction():
    return JunctionParams.symmetric(0.32)


@pytest.fixture(scope="session")
def cold_table(cold_junction):
    return build_table(cold_junction, GridSpec(omega_max=6.0))


@pytest.fixture(scope="session")
def hot_table(hot_junction):
    return build_table(hot_junction, GridSpec(omega_max=6.0))


@pytest.fixture(scope="session")
def lab():
    """Reference circuit in reduced units."""
    return to_reduced_units(default_config())


@pytest.fixture(scope="session")
def lab_table(lab):
    """Table wide enough for drives up to 0.2 mV near 30 GHz."""
    return build_table(lab.junction, GridSpec(omega_max=20.0, coarse_step=0.02))
