import mpmath as mp
import numpy as np
import pytest

from kfptools import validate_spec

mp.mp.dps = 40


@pytest.fixture(scope="session")
def heat():
    return validate_spec(np.eye(2), np.zeros((2, 2)))


@pytest.fixture(scope="session")
def kolmogorov():
    return validate_spec([[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]])


@pytest.fixture(scope="session")
def rotation():
    return validate_spec([[1.0, 0.0], [0.0, 0.0]], [[0.0, -1.0], [1.0, 0.0]])


@pytest.fixture(scope="session")
def degenerate_ou():
    return validate_spec([[1.0, 0.0], [0.0, 0.0]], [[1.0, 0.0], [1.0, 0.0]])


def volume_heat(t):
    return np.pi * t


def volume_kolmogorov(t):
    return np.pi * 12.0 ** -0.5 * t ** 2


def volume_rotation(t):
    # evaluated in extended precision: the closed form cancels
    # catastrophically below t ~ 1e-3 in doubles
    tm = mp.mpf(t)
    return float(mp.pi * mp.sqrt(tm * tm / 4 + (mp.cos(2 * tm) - 1) / 8))


def volume_degenerate_ou(t):
    # closed form for det C(t) of the idempotent-drift example; the volume
    # is omega_2 times its square root (extended precision for small t)
    tm = mp.mpf(t)
    paren = (2 * mp.e ** tm - tm / 2 - 1
             + (tm / 2) * mp.e ** (2 * tm) - mp.e ** (2 * tm))
    return float(mp.pi * mp.sqrt(paren))
