"""Pilot and data frames, effective channel matrix, and LMMSE detection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConfigError, GridMismatchError
from .grid import DdGrid, DdMatrix, PathParams
from .channel import generate_dd_channel

# Gray-labelled constellations, normalised to unit average energy.  The
# two bits per axis of 16-QAM map through [-3, -1, +3, +1] so neighbouring
# amplitudes differ in a single bit.
_GRAY_AMP_4 = np.array([-1.0, 1.0])
_GRAY_AMP_16 = np.array([-3.0, -1.0, 3.0, 1.0])


def _build_constellation(order: int) -> np.ndarray:
    if order == 4:
        amps, norm = _GRAY_AMP_4, np.sqrt(2.0)
    elif order == 16:
        amps, norm = _GRAY_AMP_16, np.sqrt(10.0)
    else:
        raise ConfigError(f"unsupported constellation order {order}; pick 4 or 16")
    side = amps.size
    pts = np.empty(order, dtype=np.complex128)
    for idx in range(order):
        i_bits, q_bits = divmod(idx, side)
        pts[idx] = (amps[i_bits] + 1j * amps[q_bits]) / norm
    return pts


QAM_CONSTELLATIONS = {4: _build_constellation(4), 16: _build_constellation(16)}
for _c in QAM_CONSTELLATIONS.values():
    _c.setflags(write=False)


@dataclass(frozen=True)
class PilotConfig:
    """Single-impulse pilot: one entry of amplitude sqrt(M N e_p)."""

    k_pilot: int = 0
    l_pilot: int = 0
    e_p: float = 1.0  # average pilot energy per bin

    def __post_init__(self):
        if self.e_p <= 0.0:
            raise ConfigError(f"pilot energy must be positive, got {self.e_p}")
        if self.k_pilot < 0 or self.l_pilot < 0:
            raise ConfigError("pilot position must be non-negative")

    def validate_on(self, grid: DdGrid):
        if self.k_pilot >= grid.N or self.l_pilot >= grid.M:
            raise ConfigError(
                f"pilot position (k={self.k_pilot}, l={self.l_pilot}) falls outside "
                f"the (N={grid.N}, M={grid.M}) grid"
            )

    def amplitude(self, grid: DdGrid) -> float:
        return float(np.sqrt(grid.size * self.e_p))


@dataclass(frozen=True)
class DataFrame:
    """A frame of constellation symbols plus the order they were drawn from."""

    symbols: DdMatrix
    order: int


def make_pilot_frame(cfg: PilotConfig, grid: DdGrid) -> DdMatrix:
    """All-zero frame with the pilot impulse at (k_pilot, l_pilot)."""
    cfg.validate_on(grid)
    x = np.zeros((grid.N, grid.M), dtype=np.complex128)
    x[cfg.k_pilot, cfg.l_pilot] = cfg.amplitude(grid)
    return DdMatrix(grid, x)


def recover_effective_channel(y: DdMatrix, cfg: PilotConfig) -> DdMatrix:
    """Invert the pilot pass: H_hat[k, l] = Y[k + k_p mod N, l + l_p mod M] / amp.

    With a noiseless pilot this recovers the effective channel frame exactly;
    with noise it adds one scaled AWGN term per bin.
    """
    grid = y.grid
    cfg.validate_on(grid)
    shifted = np.roll(y.data, shift=(-cfg.k_pilot, -cfg.l_pilot), axis=(0, 1))
    return DdMatrix(grid, shifted / cfg.amplitude(grid))


def make_data_frame(
    order: int, rng: np.random.Generator, grid: DdGrid
) -> tuple[DataFrame, np.ndarray]:
    """Draw a frame of i.i.d. uniform QAM symbols; returns the frame and the
    (N, M) integer symbol indices for error counting."""
    constellation = QAM_CONSTELLATIONS.get(order)
    if constellation is None:
        raise ConfigError(f"unsupported constellation order {order}; pick 4 or 16")
    idx = rng.integers(0, order, size=(grid.N, grid.M))
    frame = DataFrame(symbols=DdMatrix(grid, constellation[idx]), order=order)
    return frame, idx


def build_effective_matrix(paths: list[PathParams], grid: DdGrid) -> np.ndarray:
    """Dense (MN, MN) matrix mapping vec(X) to vec(Y) for this channel.

    Entry (i, j) is H[(k_i - k_j) mod N, (l_i - l_j) mod M] where H is the
    effective frame and flat indices follow the column-stacking convention
    f = k + N * l.  Kept dense, so the frame must stay small.
    """
    if grid.size > 4096:
        raise ConfigError(
            f"dense effective matrix needs M*N <= 4096, got {grid.size}; use a smaller grid"
        )
    h = generate_dd_channel(paths, grid).data
    f = np.arange(grid.size)
    k_f = f % grid.N
    l_f = f // grid.N
    kk = (k_f[:, None] - k_f[None, :]) % grid.N
    ll = (l_f[:, None] - l_f[None, :]) % grid.M
    return h[kk, ll]


def lmmse_detect(
    y: np.ndarray, h_eff: np.ndarray, sigma2: float, order: int
) -> np.ndarray:
    """LMMSE equalisation followed by nearest-point slicing.

    Computes x = H^H (H H^H + sigma2 I)^{-1} y and maps every entry to the
    closest constellation point, returning integer symbol indices.  A
    numerically singular system raises the underlying solver error.
    """
    constellation = QAM_CONSTELLATIONS.get(order)
    if constellation is None:
        raise ConfigError(f"unsupported constellation order {order}; pick 4 or 16")
    y = np.asarray(y, dtype=np.complex128)
    n = h_eff.shape[0]
    if h_eff.shape != (n, n) or y.shape != (n,):
        raise GridMismatchError(
            f"shape mismatch: y {y.shape} vs effective matrix {h_eff.shape}"
        )
    gram = h_eff @ h_eff.conj().T + sigma2 * np.eye(n)
    x_soft = h_eff.conj().T @ scipy.linalg.solve(gram, y, assume_a="pos")
    dist = np.abs(x_soft[:, None] - constellation[None, :])
    return np.argmin(dist, axis=1)
