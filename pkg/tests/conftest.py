import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def simplex_points(draw, min_dim=2, max_dim=6, dim=None, positive=True):
    d = dim or draw(st.integers(min_dim, max_dim))
    lo = 1e-3 if positive else 0.0
    w = draw(st.lists(st.floats(lo, 1.0), min_size=d, max_size=d))
    w = np.array(w)
    if w.sum() == 0:
        w[0] = 1.0
    return w / w.sum()


@st.composite
def simplex_pairs(draw, min_dim=2, max_dim=6):
    d = draw(st.integers(min_dim, max_dim))
    return draw(simplex_points(dim=d)), draw(simplex_points(dim=d))


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)
