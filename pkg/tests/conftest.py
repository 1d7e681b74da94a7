import numpy as np
import pytest

from chansounder import pn, pulse, sliding


@pytest.fixture(scope="session")
def chips10():
    return pn.generate_glfsr(10)


@pytest.fixture(scope="session")
def rrc_taps():
    return pulse.design_rrc()


@pytest.fixture(scope="session")
def sounder_config():
    return sliding.SounderConfig()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
