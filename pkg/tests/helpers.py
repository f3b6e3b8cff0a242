import numpy as np


def random_complex(rng, shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def compact_complex(rng, n=8, box=4):
    """Random complex image whose support is a box x box block inside an n x n frame."""
    x = np.zeros((n, n), complex)
    r, c = rng.integers(0, n - box + 1, 2)
    x[r:r + box, c:c + box] = random_complex(rng, (box, box))
    return x
