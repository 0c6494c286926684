"""Shared fixtures: the reference grid, reduced grids, and a seeded rng."""
import numpy as np
import pytest

from ddce.grid import DdGrid


@pytest.fixture(scope="session")
def ref_grid() -> DdGrid:
    """Full-size reference grid: 64 delay bins, 32 Doppler bins at 30 kHz."""
    return DdGrid(M=64, N=32, delta_f=30e3, fc=5.1e9)


@pytest.fixture(scope="session")
def small_grid() -> DdGrid:
    """Small grid for quadratic-cost oracles (direct convolution, matrices)."""
    return DdGrid(M=8, N=4, delta_f=30e3, fc=5.1e9)


@pytest.fixture(scope="session")
def ser_grid() -> DdGrid:
    """Detection-sized grid: keeps the dense MN x MN solve cheap."""
    return DdGrid(M=16, N=8, delta_f=30e3, fc=5.1e9)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(20260823)
