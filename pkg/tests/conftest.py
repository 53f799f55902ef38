import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20260813)


def random_hermitian(rng, dim):
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (m + m.conj().T) / 2
