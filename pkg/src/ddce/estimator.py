"""Sparse path estimation on a recovered delay-Doppler frame.

The estimator works tap by tap.  Candidate taps are strict local peaks of
the frame magnitude.  For each tap the fractional delay and Doppler offsets
are found by correlating magnitude templates of the periodic responses
against the tap's row and column slices, searched on a fine grid around the
integer position.  The complex gain then follows in closed form by inverting
the separable response at the tap cell.

Because a fractional path leaks energy into every bin, strong paths bias the
slices of weaker ones.  The sequential driver therefore ranks taps by how
much they leak into their neighbourhood, estimates the leakiest tap first,
and subtracts its reconstructed single-path frame from a working copy before
moving on, so later taps see a cleaner channel.  A switch disables the
subtraction for ablation runs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import GainSingularError, LeakageUndefinedError
from .grid import DdGrid, DdMatrix, PathParams, wrap_centered
from .channel import generate_dd_channel, periodic_sum_kernel

logger = logging.getLogger(__name__)

# Below this magnitude the separable response at the tap cell is treated as
# zero and the gain is not recoverable from that cell.
GAIN_DENOMINATOR_FLOOR = 1e-9


@dataclass(frozen=True)
class SearchConfig:
    """Candidate-grid layout and path budget for the sequential estimator.

    The fractional search scans half_width bins either side of the integer
    tap in increments of step; both endpoints are included and the integer
    tap itself is always an exact candidate.
    """

    half_width: float = 1.0
    step: float = 0.01
    p_max: int = 5

    def __post_init__(self):
        if self.step <= 0.0 or self.step > self.half_width:
            raise ValueError(
                f"need 0 < step <= half_width, got step={self.step}, half_width={self.half_width}"
            )
        if self.p_max < 1:
            raise ValueError(f"p_max must be >= 1, got {self.p_max}")

    @property
    def num_steps(self) -> int:
        """Number of search increments across the window (candidates = num_steps + 1)."""
        return 2 * int(round(self.half_width / self.step))

    def offsets(self) -> np.ndarray:
        """Candidate offsets relative to the integer tap, centred on 0."""
        half = self.num_steps // 2
        return np.arange(-half, half + 1) * self.step


@dataclass(frozen=True)
class TapLocation:
    """Integer grid cell of a detected path with its peak magnitude."""

    k_p: int
    l_p: int
    peak_energy: float


@dataclass(frozen=True)
class PathEstimate:
    """Estimated parameters for one tap, in grid units."""

    tap: TapLocation
    l_tau_hat: float
    k_nu_hat: float
    alpha_hat: complex
    leakage: float

    def to_path_params(self) -> PathParams:
        return PathParams(l_tau=self.l_tau_hat, k_nu=self.k_nu_hat, alpha=self.alpha_hat)


@lru_cache(maxsize=16)
def _template_tables(grid: DdGrid, half_width: float, step: float):
    """Magnitude-response tables shared by every tap of a run.

    Row i of the Doppler table holds the template for candidate offset
    offsets[i], sampled at cyclic distances d = 0..N-1 from the tap, so
    scoring one tap is a single matrix-vector product against the rolled
    magnitude slice.  The delay table is built the same way over M bins.
    """
    cfg = SearchConfig(half_width=half_width, step=step)
    offs = cfg.offsets()
    d_k = np.arange(grid.N)
    d_l = np.arange(grid.M)
    dop = np.abs(periodic_sum_kernel((offs[:, None] - d_k[None, :]) / grid.N, grid.N))
    dly = np.abs(periodic_sum_kernel((d_l[None, :] - offs[:, None]) / grid.M, grid.M))
    for a in (offs, dop, dly):
        a.setflags(write=False)
    return offs, dop, dly


def doppler_template(k_nu_candidate: float, grid: DdGrid) -> np.ndarray:
    """|sum_n exp(j 2 pi n (k_nu - k) / N)| over the N Doppler bins."""
    k_axis = np.arange(grid.N)
    return np.abs(periodic_sum_kernel((k_nu_candidate - k_axis) / grid.N, grid.N))


def delay_template(l_tau_candidate: float, grid: DdGrid) -> np.ndarray:
    """|sum_m exp(j 2 pi m (l - l_tau) / M)| over the M delay bins."""
    l_axis = np.arange(grid.M)
    return np.abs(periodic_sum_kernel((l_axis - l_tau_candidate) / grid.M, grid.M))


def extract_paths(h_hat: DdMatrix, p_max: int) -> list[TapLocation]:
    """Pick up to p_max strongest cells that strictly dominate their four
    cyclic neighbours, in descending magnitude order.

    Cells that fail the peak test are skipped and replaced by the next
    strongest untried cell; the list is shorter than p_max when the frame
    runs out of valid peaks.
    """
    grid = h_hat.grid
    if p_max < 1:
        raise ValueError(f"p_max must be >= 1, got {p_max}")
    if p_max > grid.size // 5:
        raise ValueError(f"p_max={p_max} exceeds the budget M*N/5 = {grid.size // 5}")
    mag = np.abs(h_hat.data)
    is_peak = (
        (mag > np.roll(mag, 1, axis=0))
        & (mag > np.roll(mag, -1, axis=0))
        & (mag > np.roll(mag, 1, axis=1))
        & (mag > np.roll(mag, -1, axis=1))
    )
    taps: list[TapLocation] = []
    for flat in np.argsort(mag, axis=None)[::-1]:
        if len(taps) == p_max:
            break
        k, l = divmod(int(flat), grid.M)
        if is_peak[k, l]:
            taps.append(TapLocation(k_p=k, l_p=l, peak_energy=float(mag[k, l])))
    return taps


def leakage_score(h_hat: DdMatrix, tap: TapLocation) -> float:
    """Summed magnitude of the four cyclic neighbours over the centre magnitude.

    Integer paths score near zero; half-bin offsets score highest.  The ratio
    is undefined at a zero-magnitude centre.
    """
    grid = h_hat.grid
    mag = np.abs(h_hat.data)
    k, l = tap.k_p, tap.l_p
    centre = mag[k, l]
    if centre == 0.0:
        raise LeakageUndefinedError(f"zero magnitude at tap (k={k}, l={l})")
    neighbours = (
        mag[(k - 1) % grid.N, l]
        + mag[(k + 1) % grid.N, l]
        + mag[k, (l - 1) % grid.M]
        + mag[k, (l + 1) % grid.M]
    )
    return float(neighbours / centre)


def _argmax_candidate(scores: np.ndarray, offsets: np.ndarray) -> float:
    """Offset of the best score; ties go to the offset nearest the integer
    tap and then to the smaller value."""
    best = scores.max()
    tied = np.flatnonzero(scores == best)
    if tied.size == 1:
        return float(offsets[tied[0]])
    t_off = offsets[tied]
    pick = tied[np.lexsort((t_off, np.abs(t_off)))[0]]
    return float(offsets[pick])


def estimate_delay_doppler(
    h_hat: DdMatrix, tap: TapLocation, cfg: SearchConfig
) -> tuple[float, float]:
    """Fractional delay and Doppler for one tap via magnitude correlation.

    The Doppler offset maximises the inner product of the candidate template
    with |H_hat[:, l_p]|; the delay offset does the same with |H_hat[k_p, :]|.
    Phase is deliberately discarded so the two searches stay separable.
    Returns (l_tau_hat, k_nu_hat) in the tap's local window, i.e. within
    half_width of (l_p, k_p) before any folding.
    """
    grid = h_hat.grid
    offs, dop_tab, dly_tab = _template_tables(grid, cfg.half_width, cfg.step)
    mag = np.abs(h_hat.data)
    col = np.roll(mag[:, tap.l_p], -tap.k_p)  # entry d = |H[(k_p + d) mod N, l_p]|
    row = np.roll(mag[tap.k_p, :], -tap.l_p)
    k_nu_hat = tap.k_p + _argmax_candidate(dop_tab @ col, offs)
    l_tau_hat = tap.l_p + _argmax_candidate(dly_tab @ row, offs)
    return float(l_tau_hat), float(k_nu_hat)


def estimate_gain(
    h_hat: DdMatrix, tap: TapLocation, l_tau_hat: float, k_nu_hat: float
) -> complex:
    """Closed-form complex gain given the tap's delay/Doppler estimates.

    Inverts the single-path synthesis at the tap cell:
    alpha = M N H[k_p, l_p] / (S_tau S_nu exp(j 2 pi k_nu l_tau / (M N)))
    with S_nu, S_tau the periodic response sums evaluated at the cell.
    """
    grid = h_hat.grid
    m, n = grid.M, grid.N
    s_nu = periodic_sum_kernel((k_nu_hat - tap.k_p) / n, n)
    s_tau = periodic_sum_kernel((tap.l_p - l_tau_hat) / m, m)
    denom = s_tau * s_nu * np.exp(2j * np.pi * k_nu_hat * l_tau_hat / (m * n))
    if abs(denom) < GAIN_DENOMINATOR_FLOOR:
        raise GainSingularError(
            f"response product {abs(denom):.3g} at tap (k={tap.k_p}, l={tap.l_p}) is "
            "numerically zero; delay/Doppler estimate sits a full bin off the tap"
        )
    return complex(m * n * h_hat.data[tap.k_p, tap.l_p] / denom)


def reconstruct_path_channel(est: PathEstimate, grid: DdGrid) -> DdMatrix:
    """Single-path frame synthesised from one estimate."""
    return generate_dd_channel([est.to_path_params()], grid)


def reconstruct_channel(estimates: list[PathEstimate], grid: DdGrid) -> DdMatrix:
    """Superposition of all estimated paths; zero frame for an empty list."""
    if not estimates:
        return DdMatrix.zeros(grid)
    return generate_dd_channel([e.to_path_params() for e in estimates], grid)


def estimate_sequential(
    h_hat: DdMatrix, cfg: SearchConfig, ipi_elimination: bool = True
) -> list[PathEstimate]:
    """Estimate up to p_max paths, leakiest tap first, cancelling as it goes.

    Taps and their leakage scores are computed once on the input frame; the
    processing order is fixed before any subtraction.  Each tap is then
    estimated against the current working frame and, when ipi_elimination is
    on, its reconstruction is subtracted before the next tap is processed.
    Taps whose gain is unrecoverable are logged and skipped.

    Doppler estimates are folded to the signed range [-N/2, N/2) so reported
    values match the physical sign convention; delay estimates keep the tap's
    local window (a path near zero delay may come back slightly negative).
    """
    grid = h_hat.grid
    taps = extract_paths(h_hat, cfg.p_max)
    if not taps:
        return []
    ranked = sorted(
        ((leakage_score(h_hat, t), t) for t in taps), key=lambda pair: -pair[0]
    )
    working = h_hat.data.copy()
    estimates: list[PathEstimate] = []
    for leak, tap in ranked:
        frame = DdMatrix(grid, working)
        l_raw, k_raw = estimate_delay_doppler(frame, tap, cfg)
        l_hat = float(l_raw)
        k_hat = float(wrap_centered(k_raw, grid.N))
        try:
            alpha = estimate_gain(frame, tap, l_hat, k_hat)
        except GainSingularError:
            logger.warning(
                "skipping tap (k=%d, l=%d): gain not recoverable at "
                "(l_tau=%.3f, k_nu=%.3f)", tap.k_p, tap.l_p, l_hat, k_hat,
            )
            continue
        est = PathEstimate(
            tap=tap, l_tau_hat=l_hat, k_nu_hat=k_hat, alpha_hat=alpha, leakage=leak
        )
        estimates.append(est)
        if ipi_elimination:
            working -= reconstruct_path_channel(est, grid).data
    return estimates
