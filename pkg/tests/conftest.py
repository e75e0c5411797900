import numpy as np
import pytest
from hypothesis import settings

settings.register_profile('default', deadline=None, max_examples=40,
                          derandomize=True)
settings.load_profile('default')


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_hermitian_pd(rng, n, cond=10.0):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, _ = np.linalg.qr(a)
    w = np.geomspace(1.0, cond, n)
    return (q * w) @ q.conj().T
