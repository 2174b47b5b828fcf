import numpy as np
import pytest

from els2.sphere import build_grid

_GRID_CACHE = {}


def get_grid(l_max):
    if l_max not in _GRID_CACHE:
        _GRID_CACHE[l_max] = build_grid(l_max)
    return _GRID_CACHE[l_max]


@pytest.fixture(scope="session")
def grid15():
    return get_grid(15)


@pytest.fixture(scope="session")
def grid31():
    return get_grid(31)


@pytest.fixture(scope="session")
def mu_set_a():
    """lambda2 = 0 set: (0, -1, 1, 2, 0, 0)."""
    return (0.0, -1.0, 1.0, 2.0, 0.0, 0.0)


@pytest.fixture(scope="session")
def mu_set_b():
    """Weak-only showcase set: (0, -1.5, 0.5, 1, 0.5, -0.5)."""
    return (0.0, -1.5, 0.5, 1.0, 0.5, -0.5)


def random_bandlimited(grid, l_hi, rng, scale=1.0):
    """Random real field with content only in degrees 1..l_hi."""
    c = np.zeros((grid.l_max + 1, grid.l_max + 1), dtype=complex)
    for l in range(1, l_hi + 1):
        c[l, 0] = scale * rng.normal()
        for m in range(1, l + 1):
            c[l, m] = scale * (rng.normal() + 1j * rng.normal()) / np.sqrt(2)
    return grid.synthesis(c), c


def field_l2(grid, values):
    """L2 norm of a scalar or vector sample array."""
    if values.ndim == 2:
        return float(np.sqrt(grid.integrate(values * values)))
    return float(np.sqrt(grid.integrate(np.einsum("jka,jka->jk", values, values))))
