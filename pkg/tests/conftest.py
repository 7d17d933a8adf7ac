import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_spd(rng, d, jitter=0.5):
    """Well-conditioned random SPD matrix."""
    a = rng.standard_normal((d, d))
    return a @ a.T + jitter * np.eye(d)
