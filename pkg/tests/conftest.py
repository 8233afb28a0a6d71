import numpy as np
import pytest

from diractrace import build_bolza, build_multiplier
from diractrace.fuchsian import enumerate_geodesics
from diractrace.moebius import GroupElement, Point


def random_element(rng, max_letters=5, allow_sign=True) -> GroupElement:
    """Random word in boosts and rotations, optionally with a sign flip."""
    g = GroupElement.identity()
    for _ in range(int(rng.integers(1, max_letters + 1))):
        if rng.random() < 0.5:
            g = g @ GroupElement.boost(rng.uniform(-2.0, 2.0))
        else:
            g = g @ GroupElement.rotation(rng.uniform(-np.pi, np.pi))
    if allow_sign and rng.random() < 0.5:
        g = -g
    return g


def random_point(rng, spread=3.0) -> Point:
    return Point(float(rng.uniform(-spread, spread)), float(np.exp(rng.uniform(-1.5, 1.5))))


@pytest.fixture(scope="session")
def bolza():
    return build_bolza()


@pytest.fixture(scope="session")
def bolza_ms(bolza):
    return build_multiplier([1, 1, 1, 1], 1, bolza)


@pytest.fixture(scope="session")
def bolza_ms_mixed(bolza):
    return build_multiplier([1, -1, 1, -1], 1, bolza)


@pytest.fixture(scope="session")
def spectrum_l7(bolza, bolza_ms):
    return enumerate_geodesics(bolza, bolza_ms, 7.0, method="pruned")


@pytest.fixture(scope="session")
def spectrum_l7_brute(bolza, bolza_ms):
    return enumerate_geodesics(bolza, bolza_ms, 7.0, method="brute")


@pytest.fixture(scope="session")
def spectrum_l12(bolza, bolza_ms):
    return enumerate_geodesics(bolza, bolza_ms, 12.0, method="pruned",
                               budget=20_000_000)
