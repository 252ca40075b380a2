import numpy as np
import pytest

from ibclab.models.polaron import PolaronConfig, build_polaron
from ibclab.services.ibc_core import setting_from_arrays
from ibclab.utils.random_settings import random_setting, toy_setting

SEEDS = (0, 1, 7)


def scalar_setting(T: float = -0.5, I: float = 0.0):
    """n = n_boundary = 1, L = 2, A = 1, lambda0 = 0, so G0 = -1/2."""
    return setting_from_arrays([[2.0]], [[1.0]], [[I]], [[T]], 0.0)


@pytest.fixture
def one_dim():
    return scalar_setting()


@pytest.fixture
def toy():
    return toy_setting()


@pytest.fixture(params=SEEDS, ids=lambda seed: f"seed{seed}")
def seeded(request):
    return random_setting(request.param, n=8, n_boundary=3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_polaron():
    return build_polaron(PolaronConfig(n_x=8, n_max=1))


@pytest.fixture(scope="session")
def two_sector_polaron():
    return build_polaron(PolaronConfig(n_x=6, n_max=2))
