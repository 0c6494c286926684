"""Delay-Doppler grid geometry, path parameters, and the frame container.

Frames are stored Doppler-major: an (N, M) complex array whose row index k
is the Doppler bin (0..N-1) and whose column index l is the delay bin
(0..M-1).  Vectorisation stacks columns, so vec(A)[k + N*l] = A[k, l].
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import GridMismatchError

SPEED_OF_LIGHT = 299_792_458.0  # [m/s]


@dataclass(frozen=True)
class DdGrid:
    """Static geometry of one delay-Doppler frame.

    M delay bins with spacing T/M seconds and N Doppler bins with spacing
    delta_f/N Hz.  The frame duration T is always 1/delta_f and is derived,
    never stored.  The carrier fc only enters when Doppler is converted to a
    velocity.
    """

    M: int            # delay bins per frame
    N: int            # Doppler bins per frame
    delta_f: float    # subcarrier spacing [Hz]
    fc: float         # carrier frequency [Hz]

    def __post_init__(self):
        if not (isinstance(self.M, int) and isinstance(self.N, int)):
            raise GridMismatchError("grid dimensions M and N must be integers")
        if self.M < 2 or self.N < 2:
            raise GridMismatchError(f"grid needs M >= 2 and N >= 2, got M={self.M}, N={self.N}")
        if self.delta_f <= 0.0:
            raise GridMismatchError(f"subcarrier spacing must be positive, got {self.delta_f}")
        if self.fc <= 0.0:
            raise GridMismatchError(f"carrier frequency must be positive, got {self.fc}")

    @property
    def T(self) -> float:
        """Frame duration [s]; T * delta_f == 1 exactly."""
        return 1.0 / self.delta_f

    @property
    def delay_resolution(self) -> float:
        """Width of one delay bin [s]."""
        return self.T / self.M

    @property
    def doppler_resolution(self) -> float:
        """Width of one Doppler bin [Hz]."""
        return self.delta_f / self.N

    @property
    def size(self) -> int:
        return self.M * self.N


@dataclass(frozen=True)
class PathParams:
    """One propagation path in grid units.

    l_tau and k_nu are real valued; their fractional parts (distance to the
    nearest integer bin) model delays and Doppler shifts that fall between
    grid points.  The usual conventions are 0 <= l_tau < M and
    -N/2 <= k_nu < N/2, enforced where a grid is in scope.
    """

    l_tau: float    # delay in delay bins
    k_nu: float     # Doppler in Doppler bins (signed)
    alpha: complex  # complex path gain


class PhysicalPath(NamedTuple):
    tau_s: float          # path delay [s]
    nu_hz: float          # Doppler shift [Hz]
    range_m: float        # propagation distance [m]
    velocity_mps: float   # radial velocity [m/s]


class DdMatrix:
    """Immutable complex frame bound to its grid.

    The payload is copied on construction and marked read-only, so instances
    are safe to share between estimator stages.
    """

    __slots__ = ("grid", "data")

    def __init__(self, grid: DdGrid, data: np.ndarray):
        arr = np.array(data, dtype=np.complex128, copy=True)
        if arr.shape != (grid.N, grid.M):
            raise GridMismatchError(
                f"frame shape {arr.shape} does not match grid (N={grid.N}, M={grid.M})"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "data", arr)

    def __setattr__(self, name, value):
        raise AttributeError("DdMatrix is immutable")

    @classmethod
    def zeros(cls, grid: DdGrid) -> "DdMatrix":
        return cls(grid, np.zeros((grid.N, grid.M), dtype=np.complex128))

    def energy(self) -> float:
        """Total energy sum |A[k, l]|^2."""
        return float(np.sum(np.abs(self.data) ** 2))

    def _check_same_grid(self, other: "DdMatrix"):
        if self.grid != other.grid:
            raise GridMismatchError("operands live on different grids")

    def __add__(self, other: "DdMatrix") -> "DdMatrix":
        self._check_same_grid(other)
        return DdMatrix(self.grid, self.data + other.data)

    def __sub__(self, other: "DdMatrix") -> "DdMatrix":
        self._check_same_grid(other)
        return DdMatrix(self.grid, self.data - other.data)

    def __mul__(self, scalar) -> "DdMatrix":
        return DdMatrix(self.grid, self.data * scalar)

    __rmul__ = __mul__

    def __repr__(self):
        return f"DdMatrix(N={self.grid.N}, M={self.grid.M}, energy={self.energy():.4g})"


def vec(a: DdMatrix) -> np.ndarray:
    """Column-stack a frame into a length-MN vector, v[k + N*l] = A[k, l]."""
    return a.data.flatten(order="F")


def invec(v: np.ndarray, grid: DdGrid) -> DdMatrix:
    """Inverse of :func:`vec`; rejects vectors of the wrong length."""
    v = np.asarray(v)
    if v.shape != (grid.size,):
        raise GridMismatchError(f"expected vector of length {grid.size}, got shape {v.shape}")
    return DdMatrix(grid, v.reshape((grid.N, grid.M), order="F"))


def wrap_doppler(k, n: int):
    """Fold a (possibly fractional) Doppler index into [0, N)."""
    return k % n


def wrap_delay(l, m: int):
    """Fold a (possibly fractional) delay index into [0, M)."""
    return l % m


def wrap_centered(x, length):
    """Fold a grid index into the signed range [-length/2, length/2)."""
    return (x + length / 2.0) % length - length / 2.0


def physical_units(p: PathParams, grid: DdGrid, two_way: bool = False) -> PhysicalPath:
    """Convert grid-unit path parameters to seconds, Hz, metres, and m/s.

    range_m is the one-way propagation distance by default; pass two_way=True
    for round-trip (reflection) geometry.
    """
    tau = p.l_tau * grid.delay_resolution
    nu = p.k_nu * grid.doppler_resolution
    rng = SPEED_OF_LIGHT * tau
    if two_way:
        rng /= 2.0
    vel = SPEED_OF_LIGHT * nu / grid.fc
    return PhysicalPath(tau_s=tau, nu_hz=nu, range_m=rng, velocity_mps=vel)
