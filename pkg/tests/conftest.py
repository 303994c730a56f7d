import numpy as np
import pytest

from kpz2d.noise_field import TorusGrid, make_mollifier, sample_noise


@pytest.fixture(scope="session")
def grid64():
    return TorusGrid(64)


@pytest.fixture(scope="session")
def grid32():
    return TorusGrid(32)


@pytest.fixture(scope="session")
def moll02(grid64):
    return make_mollifier("bump", 0.2, grid64)


@pytest.fixture(scope="session")
def noise_small(grid32):
    # 0.5 time units in 50 slices on a 32-grid; cached in full
    return sample_noise(grid32, 0.01, 50, seed=424242)


class ZeroNoise:
    """Noise stand-in with xi identically zero (for null-forcing checks)."""

    def __init__(self, base):
        self._base = base
        self.grid = base.grid
        self.dt = base.dt
        self.steps = base.steps
        self.seed = base.seed
        self.t_final = base.t_final

    def slice(self, j):
        return np.zeros((self.grid.n, self.grid.n))

    def integral_weight(self):
        return self._base.integral_weight()


class ScaledNoise:
    """Noise stand-in with xi scaled by a constant (linearity checks)."""

    def __init__(self, base, factor):
        self._base = base
        self.factor = factor
        self.grid = base.grid
        self.dt = base.dt
        self.steps = base.steps
        self.seed = base.seed
        self.t_final = base.t_final

    def slice(self, j):
        return self.factor * self._base.slice(j)

    def integral_weight(self):
        return self._base.integral_weight()


@pytest.fixture
def zero_noise(noise_small):
    return ZeroNoise(noise_small)
