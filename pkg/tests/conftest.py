import numpy as np
import pytest

from rollball.config import make_rng
from rollball.surface import ParabolicProfile, Params, PlaneProfile, PolynomialProfile

MU = 2.0 / 7.0


@pytest.fixture
def rng():
    return make_rng(12345)


@pytest.fixture
def params():
    """Homogeneous ball with gamma = 1 (mu = 2/7)."""
    return Params(0.4, 1.4, 0.0)


PROFILES = {
    "plane": PlaneProfile(),
    "parabolic": ParabolicProfile(1.0),
    "poly": PolynomialProfile((0.0, 1.0, 0.1)),
}


@pytest.fixture(params=sorted(PROFILES))
def profile(request):
    return PROFILES[request.param]


def random_polar(rng, n, r_lo=0.3, r_hi=2.5):
    return np.column_stack([rng.uniform(r_lo, r_hi, n), rng.normal(size=(n, 3))])
