import numpy as np
import pytest

from excursus.spec import absorbed_brownian, bessel3, brownian


@pytest.fixture(scope="session")
def bm():
    return brownian()


@pytest.fixture(scope="session")
def bm_drift():
    return brownian(0.5)


@pytest.fixture(scope="session")
def bes3():
    return bessel3()


@pytest.fixture(scope="session")
def bm_abs():
    return absorbed_brownian()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
