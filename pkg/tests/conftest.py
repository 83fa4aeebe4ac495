import numpy as np
import pytest

from qsteer.states import BlochVector, from_bloch

# Matrix conventions shared by the oracle helpers (ground-first basis ordering;
# the evolution maps' y-rotation generator is the transposed-sign sigma_y).
SX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SY_STD = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SY_MAP = np.array([[0.0, 1.0j], [-1.0j, 0.0]], dtype=complex)


def random_bloch(rng, pure=False):
    v = rng.standard_normal(3)
    v /= np.linalg.norm(v)
    if not pure:
        v *= rng.uniform() ** (1.0 / 3.0)
    return BlochVector(*v)


def random_state(rng, pure=False):
    return from_bloch(random_bloch(rng, pure=pure))


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
