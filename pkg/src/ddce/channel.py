"""Delay-Doppler channel synthesis, application, noise, and scenario sampling.

A sparse multipath channel with fractional delay/Doppler offsets produces a
dense effective frame: each path contributes the outer product of a periodic
Doppler response (length N) and a periodic delay response (length M), scaled
by the gain and a coupling phase.  Paths that land exactly on grid points
collapse to single impulses; fractional paths leak into every bin.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, GridMismatchError
from .grid import DdGrid, DdMatrix, PathParams


@dataclass(frozen=True)
class ScenarioConfig:
    """Multipath scenario with a fixed line-of-sight layout.

    Path 1 is the line-of-sight ray at zero delay, path 2 (when present)
    trails it by fixed_delay_gap_s, and any further paths draw i.i.d.
    uniform delays from delay_range_s.  Every path gets a Jakes-profile
    Doppler shift max_doppler_hz * cos(theta) with theta uniform on (0, 2pi].
    Gains follow a Rician split: deterministic line-of-sight magnitude,
    circularly-symmetric Gaussian reflections with a uniform power profile,
    total mean power 1.
    """

    num_paths: int = 5
    rice_factor_db: float = 15.0       # LoS power over aggregate NLoS power [dB]
    fixed_delay_gap_s: float = 0.2e-6  # delay of path 2 behind the LoS [s]
    delay_range_s: tuple[float, float] = (0.867e-6, 7.0e-6)  # paths 3..P [s]
    max_doppler_hz: float = 1700.0
    seed: int | None = None            # fallback entropy when no generator is passed

    def __post_init__(self):
        if self.num_paths < 1:
            raise ConfigError(f"num_paths must be >= 1, got {self.num_paths}")
        lo, hi = self.delay_range_s
        if lo < 0.0 or hi < lo:
            raise ConfigError(f"delay_range_s must satisfy 0 <= lo <= hi, got {self.delay_range_s}")
        if self.fixed_delay_gap_s < 0.0:
            raise ConfigError("fixed_delay_gap_s must be non-negative")
        if self.max_doppler_hz < 0.0:
            raise ConfigError("max_doppler_hz must be non-negative")


@dataclass(frozen=True)
class NoiseConfig:
    """Additive white Gaussian noise level (complex variance per bin)."""

    sigma2: float

    def __post_init__(self):
        if self.sigma2 <= 0.0:
            raise ConfigError(f"noise variance must be positive, got {self.sigma2}")

    @classmethod
    def from_psnr(cls, psnr_db: float, e_p: float = 1.0) -> "NoiseConfig":
        """Noise level for a given pilot-SNR in dB: sigma2 = e_p / 10^(psnr/10)."""
        return cls(sigma2=e_p / 10.0 ** (psnr_db / 10.0))


def periodic_sum_kernel(x, length: int):
    """Closed form of the geometric sum sum_{n=0}^{L-1} exp(j 2 pi n x).

    Equals L when x is an integer (every term is 1); otherwise
    exp(j pi (L-1) x) * sin(pi L x) / sin(pi x).  Accepts scalars or arrays.
    """
    if length < 1:
        raise ValueError(f"kernel length must be >= 1, got {length}")
    x = np.asarray(x, dtype=np.float64)
    frac = x - np.round(x)
    on_integer = np.abs(frac) < 1e-12
    safe = np.where(on_integer, 0.25, x)  # dodge sin(pi x) = 0 in the masked lanes
    out = np.exp(1j * np.pi * (length - 1) * safe) * (
        np.sin(np.pi * length * safe) / np.sin(np.pi * safe)
    )
    out = np.where(on_integer, complex(length), out)
    if out.ndim == 0:
        return complex(out)
    return out


def generate_dd_channel(paths: list[PathParams], grid: DdGrid) -> DdMatrix:
    """Synthesise the effective delay-Doppler channel frame for a path list.

    Each path adds alpha * exp(j 2 pi k_nu l_tau / (M N)) / (M N) times the
    outer product of its Doppler response sum_n exp(-j 2 pi n (k - k_nu) / N)
    and delay response sum_m exp(+j 2 pi m (l - l_tau) / M).
    """
    m, n = grid.M, grid.N
    k_axis = np.arange(n)
    l_axis = np.arange(m)
    h = np.zeros((n, m), dtype=np.complex128)
    for p in paths:
        doppler = periodic_sum_kernel((p.k_nu - k_axis) / n, n)
        delay = periodic_sum_kernel((l_axis - p.l_tau) / m, m)
        coupling = np.exp(2j * np.pi * p.k_nu * p.l_tau / (m * n))
        h += (p.alpha * coupling / (m * n)) * np.outer(doppler, delay)
    return DdMatrix(grid, h)


def apply_channel(x: DdMatrix, paths: list[PathParams], grid: DdGrid) -> DdMatrix:
    """Pass a frame through the channel: 2-D circular convolution with the
    effective frame, evaluated as an FFT pointwise product."""
    if x.grid != grid:
        raise GridMismatchError("input frame does not live on the requested grid")
    h = generate_dd_channel(paths, grid)
    y = np.fft.ifft2(np.fft.fft2(h.data) * np.fft.fft2(x.data))
    return DdMatrix(grid, y)


def add_awgn(a: DdMatrix, noise: NoiseConfig, rng: np.random.Generator) -> DdMatrix:
    """Add i.i.d. circularly-symmetric Gaussian noise of variance sigma2 per bin."""
    scale = np.sqrt(noise.sigma2 / 2.0)
    shape = a.data.shape
    z = rng.normal(scale=scale, size=shape) + 1j * rng.normal(scale=scale, size=shape)
    return DdMatrix(a.grid, a.data + z)


def sample_scenario(
    cfg: ScenarioConfig, grid: DdGrid, rng: np.random.Generator | None = None
) -> list[PathParams]:
    """Draw one random multipath realisation in grid units.

    Delays are converted via l_tau = tau * M / T and Dopplers via
    k_nu = nu * N / delta_f.  The line-of-sight magnitude is fixed at
    sqrt(K / (K + 1)) with a random phase; each reflection is complex
    Gaussian with variance 1 / ((K + 1)(P - 1)) so the mean total power is 1.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    p_count = cfg.num_paths
    t_frame = grid.T

    if cfg.delay_range_s[1] >= t_frame:
        raise ConfigError(
            f"delay range upper edge {cfg.delay_range_s[1]:.3g} s does not fit inside "
            f"the frame duration {t_frame:.3g} s"
        )
    if cfg.fixed_delay_gap_s >= t_frame:
        raise ConfigError("fixed_delay_gap_s does not fit inside the frame duration")
    if cfg.max_doppler_hz > grid.delta_f / 2.0:
        raise ConfigError(
            f"max_doppler_hz {cfg.max_doppler_hz:.3g} exceeds the unambiguous limit "
            f"delta_f/2 = {grid.delta_f / 2.0:.3g} Hz"
        )

    delays_s = np.zeros(p_count)
    if p_count >= 2:
        delays_s[1] = cfg.fixed_delay_gap_s
    if p_count >= 3:
        delays_s[2:] = rng.uniform(cfg.delay_range_s[0], cfg.delay_range_s[1], size=p_count - 2)

    theta = rng.uniform(0.0, 2.0 * np.pi, size=p_count)
    doppler_hz = cfg.max_doppler_hz * np.cos(theta)

    k_lin = 10.0 ** (cfg.rice_factor_db / 10.0)
    gains = np.empty(p_count, dtype=np.complex128)
    if p_count == 1:
        los_mag = 1.0
    else:
        los_mag = np.sqrt(k_lin / (k_lin + 1.0))
        var_nlos = 1.0 / ((k_lin + 1.0) * (p_count - 1))  # per-path complex variance
        s = np.sqrt(var_nlos / 2.0)
        gains[1:] = rng.normal(scale=s, size=p_count - 1) + 1j * rng.normal(
            scale=s, size=p_count - 1
        )
    gains[0] = los_mag * np.exp(2j * np.pi * rng.uniform())

    l_tau = delays_s * grid.M / t_frame
    k_nu = doppler_hz * grid.N / grid.delta_f
    return [
        PathParams(l_tau=float(l_tau[i]), k_nu=float(k_nu[i]), alpha=complex(gains[i]))
        for i in range(p_count)
    ]
