import numpy as np


def random_hermitian(rng, n, scale=1.0):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * (a + a.conj().T) / 2


def random_unit_vector(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)
