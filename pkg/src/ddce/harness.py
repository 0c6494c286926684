"""Monte-Carlo experiment harness: config, trial pipelines, aggregation, output.

A run sweeps one dB quantity (pilot SNR or data SNR depending on mode) and
executes independent seeded trials per point.  Per-trial seeds derive from
the master seed and the (point, trial) counters, so results are reproducible
and independent of execution order or worker count.  NMSE and SER aggregate
in the linear domain; dB conversion happens only at reporting time.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .errors import ConfigError
from .grid import DdGrid, PathParams, vec, wrap_centered
from .channel import (
    NoiseConfig,
    ScenarioConfig,
    add_awgn,
    apply_channel,
    generate_dd_channel,
    sample_scenario,
)
from .transceiver import (
    PilotConfig,
    build_effective_matrix,
    lmmse_detect,
    make_data_frame,
    make_pilot_frame,
    recover_effective_channel,
)
from .estimator import (
    SearchConfig,
    estimate_sequential,
    extract_paths,
    estimate_delay_doppler,
    reconstruct_channel,
)
from .metrics import associate_and_score, joint_grid_oracle, ser

logger = logging.getLogger(__name__)

MODES = ("nmse", "param-mse", "ser", "oracle-check")

# Tolerance, in search steps, when comparing the separable and joint argmax.
_ORACLE_AGREE_STEPS = 1.0


@dataclass(frozen=True)
class ExperimentConfig:
    """Complete description of one experiment run."""

    grid: DdGrid
    scenario: ScenarioConfig
    pilot: PilotConfig
    search: SearchConfig
    sweep_db: tuple[float, ...]
    trials: int
    mode: str = "nmse"
    ipi_elimination: bool = True
    seed: int = 1234
    output: str | None = None
    constellation_order: int = 4
    pilot_psnr_db: float | None = None  # ser mode: fixed pilot SNR; None tracks the sweep

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if not self.sweep_db:
            raise ConfigError("sweep_db must list at least one point")
        if self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        if self.mode == "ser" and self.grid.size > 4096:
            raise ConfigError(
                f"ser mode builds a dense MN x MN matrix; M*N={self.grid.size} exceeds 4096"
            )
        self.pilot.validate_on(self.grid)


def default_config(mode: str = "nmse") -> ExperimentConfig:
    """Reference configuration per mode.

    Channel-estimation modes use the 64 x 32 grid at 30 kHz spacing with the
    five-path Rician scenario; ser mode drops to a 16 x 8 grid so that the
    dense effective matrix and LMMSE solve stay cheap.
    """
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    scenario = ScenarioConfig(
        num_paths=5,
        rice_factor_db=15.0,
        fixed_delay_gap_s=0.2e-6,
        delay_range_s=(0.867e-6, 7.0e-6),
        max_doppler_hz=1700.0,
    )
    pilot = PilotConfig(k_pilot=0, l_pilot=0, e_p=1.0)
    search = SearchConfig(half_width=1.0, step=0.01, p_max=5)
    if mode == "ser":
        # The reduced grid has 4x coarser delay and Doppler resolution, so the
        # physical spreads are scaled up 4x to keep the same geometry in grid
        # units (path separations in bins) as the full-size scenario.
        ser_scenario = replace(
            scenario,
            fixed_delay_gap_s=0.8e-6,
            delay_range_s=(3.468e-6, 28.0e-6),
            max_doppler_hz=6800.0,
        )
        return ExperimentConfig(
            grid=DdGrid(M=16, N=8, delta_f=30e3, fc=5.1e9),
            scenario=ser_scenario,
            pilot=pilot,
            search=search,
            sweep_db=(5.0, 10.0, 15.0, 20.0),
            trials=200,
            mode=mode,
        )
    grid = DdGrid(M=64, N=32, delta_f=30e3, fc=5.1e9)
    if mode == "oracle-check":
        return ExperimentConfig(
            grid=grid,
            scenario=scenario,
            pilot=pilot,
            search=search,
            sweep_db=(0.0,),
            trials=100,
            mode=mode,
        )
    return ExperimentConfig(
        grid=grid,
        scenario=scenario,
        pilot=pilot,
        search=search,
        sweep_db=(10.0, 20.0, 30.0, 40.0),
        trials=100,
        mode=mode,
    )


# === Config file round-trip ===================================================

def config_to_dict(cfg: ExperimentConfig) -> dict:
    return {
        "grid": {
            "m": cfg.grid.M,
            "n": cfg.grid.N,
            "delta_f_hz": cfg.grid.delta_f,
            "fc_hz": cfg.grid.fc,
        },
        "scenario": {
            "num_paths": cfg.scenario.num_paths,
            "rice_factor_db": cfg.scenario.rice_factor_db,
            "fixed_delay_gap_s": cfg.scenario.fixed_delay_gap_s,
            "delay_range_s": list(cfg.scenario.delay_range_s),
            "max_doppler_hz": cfg.scenario.max_doppler_hz,
        },
        "pilot": {
            "k_pilot": cfg.pilot.k_pilot,
            "l_pilot": cfg.pilot.l_pilot,
            "e_p": cfg.pilot.e_p,
        },
        "search": {
            "half_width": cfg.search.half_width,
            "step": cfg.search.step,
            "p_max": cfg.search.p_max,
        },
        "sweep_db": list(cfg.sweep_db),
        "trials": cfg.trials,
        "mode": cfg.mode,
        "ipi_elimination": cfg.ipi_elimination,
        "seed": cfg.seed,
        "output": cfg.output,
        "constellation_order": cfg.constellation_order,
        "pilot_psnr_db": cfg.pilot_psnr_db,
    }


_MISSING = object()


def _section(raw: dict, name: str, source: str) -> dict:
    sec = raw.get(name)
    if not isinstance(sec, dict):
        raise ConfigError(f"{source}: missing or malformed section {name!r}")
    return sec


def _get(sec: dict, label: str, kind, source: str, default=_MISSING):
    key = label.rsplit(".", 1)[-1]
    if key not in sec:
        if default is not _MISSING:
            return default
        raise ConfigError(f"{source}: missing key {label}")
    val = sec[key]
    try:
        if kind is int:
            if isinstance(val, bool) or int(val) != val:
                raise ValueError
        return kind(val)
    except (TypeError, ValueError):
        raise ConfigError(f"{source}: {label} must be of type {kind.__name__}, got {val!r}")


def parse_config(raw: dict, source: str = "<config>") -> ExperimentConfig:
    """Build an ExperimentConfig from a parsed mapping with key-path errors."""
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    g = _section(raw, "grid", source)
    s = _section(raw, "scenario", source)
    p = _section(raw, "pilot", source)
    q = _section(raw, "search", source)
    try:
        grid = DdGrid(
            M=_get(g, "grid.m", int, source),
            N=_get(g, "grid.n", int, source),
            delta_f=_get(g, "grid.delta_f_hz", float, source),
            fc=_get(g, "grid.fc_hz", float, source),
        )
        rng_raw = s.get("delay_range_s")
        if not (isinstance(rng_raw, (list, tuple)) and len(rng_raw) == 2):
            raise ConfigError(f"{source}: scenario.delay_range_s must be a [low, high] pair")
        scenario = ScenarioConfig(
            num_paths=_get(s, "scenario.num_paths", int, source),
            rice_factor_db=_get(s, "scenario.rice_factor_db", float, source),
            fixed_delay_gap_s=_get(s, "scenario.fixed_delay_gap_s", float, source),
            delay_range_s=(float(rng_raw[0]), float(rng_raw[1])),
            max_doppler_hz=_get(s, "scenario.max_doppler_hz", float, source),
        )
        pilot = PilotConfig(
            k_pilot=_get(p, "pilot.k_pilot", int, source),
            l_pilot=_get(p, "pilot.l_pilot", int, source),
            e_p=_get(p, "pilot.e_p", float, source, 1.0),
        )
        search = SearchConfig(
            half_width=_get(q, "search.half_width", float, source, 1.0),
            step=_get(q, "search.step", float, source, 0.01),
            p_max=_get(q, "search.p_max", int, source, 5),
        )
        sweep = raw.get("sweep_db")
        if not (isinstance(sweep, (list, tuple)) and len(sweep) >= 1):
            raise ConfigError(f"{source}: sweep_db must be a non-empty list of dB values")
        out = raw.get("output")
        ppsnr = raw.get("pilot_psnr_db")
        return ExperimentConfig(
            grid=grid,
            scenario=scenario,
            pilot=pilot,
            search=search,
            sweep_db=tuple(float(v) for v in sweep),
            trials=_get(raw, "trials", int, source),
            mode=str(raw.get("mode", "nmse")),
            ipi_elimination=bool(raw.get("ipi_elimination", True)),
            seed=_get(raw, "seed", int, source, 1234),
            output=None if out is None else str(out),
            constellation_order=_get(raw, "constellation_order", int, source, 4),
            pilot_psnr_db=None if ppsnr is None else float(ppsnr),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse a YAML config file; parse errors carry the file position."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(raw, source=str(path))


def dump_default_config(mode: str = "nmse") -> str:
    return yaml.safe_dump(config_to_dict(default_config(mode)), sort_keys=False)


def config_hash(cfg: ExperimentConfig) -> str:
    """sha256 over the canonical config dict, ignoring the output location."""
    payload = config_to_dict(cfg)
    payload.pop("output", None)
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


# === Per-trial pipelines ======================================================

def _trial_rng(cfg: ExperimentConfig, point_idx: int, trial_idx: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([cfg.seed, point_idx, trial_idx]))


def _estimate_from_pilot(cfg: ExperimentConfig, paths, psnr_db, rng):
    """Shared pilot pass: transmit, add noise, recover, run the estimator."""
    grid = cfg.grid
    x = make_pilot_frame(cfg.pilot, grid)
    y = apply_channel(x, paths, grid)
    y = add_awgn(y, NoiseConfig.from_psnr(psnr_db, cfg.pilot.e_p), rng)
    h_raw = recover_effective_channel(y, cfg.pilot)
    return estimate_sequential(h_raw, cfg.search, ipi_elimination=cfg.ipi_elimination)


def _trial_nmse(cfg: ExperimentConfig, sweep_db: float, rng) -> dict:
    grid = cfg.grid
    paths = sample_scenario(cfg.scenario, grid, rng)
    h_true = generate_dd_channel(paths, grid)
    estimates = _estimate_from_pilot(cfg, paths, sweep_db, rng)
    h_model = reconstruct_channel(estimates, grid)
    ratio = float(np.sum(np.abs(h_model.data - h_true.data) ** 2)) / h_true.energy()
    return {"nmse_lin": ratio}


def _trial_param(cfg: ExperimentConfig, sweep_db: float, rng) -> dict:
    grid = cfg.grid
    paths = sample_scenario(cfg.scenario, grid, rng)
    estimates = _estimate_from_pilot(cfg, paths, sweep_db, rng)
    score = associate_and_score(paths, estimates, grid)
    return {
        "n_matched": len(score.matched_pairs),
        "mse_delay_s2": score.mse_delay_s2,
        "mse_doppler_hz2": score.mse_doppler_hz2,
        "mse_gain": score.mse_gain,
        "mse_delay_grid2": score.mse_delay_grid2,
        "mse_doppler_grid2": score.mse_doppler_grid2,
        "misses": score.misses,
        "spurious": score.spurious,
    }


def _trial_ser(cfg: ExperimentConfig, sweep_db: float, rng) -> dict:
    grid = cfg.grid
    paths = sample_scenario(cfg.scenario, grid, rng)
    pilot_psnr = cfg.pilot_psnr_db if cfg.pilot_psnr_db is not None else sweep_db
    estimates = _estimate_from_pilot(cfg, paths, pilot_psnr, rng)

    h_eff_est = build_effective_matrix([e.to_path_params() for e in estimates], grid)
    h_eff_true = build_effective_matrix(paths, grid)

    frame, tx_idx = make_data_frame(cfg.constellation_order, rng, grid)
    sigma2 = 10.0 ** (-sweep_db / 10.0)  # unit-energy symbols
    y = apply_channel(frame.symbols, paths, grid)
    y = add_awgn(y, NoiseConfig(sigma2), rng)
    y_vec = vec(y)
    tx = tx_idx.flatten(order="F")
    return {
        "ser_est": ser(lmmse_detect(y_vec, h_eff_est, sigma2, cfg.constellation_order), tx),
        "ser_perfect": ser(lmmse_detect(y_vec, h_eff_true, sigma2, cfg.constellation_order), tx),
    }


def _trial_oracle(cfg: ExperimentConfig, sweep_db: float, rng) -> dict:
    """Noiseless single fractional path: do the separable and the joint
    exhaustive searches land on the same candidate (within one step)?"""
    grid = cfg.grid
    path = PathParams(
        l_tau=float(rng.uniform(0.0, grid.M)),
        k_nu=float(rng.uniform(-grid.N / 2.0, grid.N / 2.0)),
        alpha=complex(np.exp(2j * np.pi * rng.uniform())),
    )
    h = generate_dd_channel([path], grid)
    taps = extract_paths(h, 1)
    if not taps:
        return {"agree": 0.0}
    tap = taps[0]
    l_sep, k_sep = estimate_delay_doppler(h, tap, cfg.search)
    l_joint, k_joint = joint_grid_oracle(h, tap, cfg.search)
    tol = _ORACLE_AGREE_STEPS * cfg.search.step + 1e-9
    agree = (
        abs(wrap_centered(l_sep - l_joint, grid.M)) <= tol
        and abs(wrap_centered(k_sep - k_joint, grid.N)) <= tol
    )
    return {"agree": float(agree)}


_TRIAL_FNS = {
    "nmse": _trial_nmse,
    "param-mse": _trial_param,
    "ser": _trial_ser,
    "oracle-check": _trial_oracle,
}


def _run_one(cfg: ExperimentConfig, point_idx: int, trial_idx: int):
    rng = _trial_rng(cfg, point_idx, trial_idx)
    fn = _TRIAL_FNS[cfg.mode]
    return fn(cfg, cfg.sweep_db[point_idx], rng)


def _worker(args):
    cfg, point_idx, trial_idx = args
    try:
        return point_idx, trial_idx, _run_one(cfg, point_idx, trial_idx), None
    except Exception as exc:  # noqa: BLE001 - failures are counted, not fatal
        return point_idx, trial_idx, None, f"{type(exc).__name__}: {exc}"


# === Aggregation ==============================================================

def linear_mean_db(linear_values) -> float:
    """Mean of linear-domain values, reported in dB."""
    mean = float(np.mean(np.asarray(linear_values, dtype=float)))
    if mean <= 0.0:
        return float("-inf")
    return 10.0 * np.log10(mean)


def _stderr(values) -> float:
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return 0.0
    return float(np.std(v, ddof=1) / np.sqrt(v.size))


def _db_stderr(linear_values) -> float:
    """Standard error of the linear mean, propagated to the dB scale."""
    v = np.asarray(linear_values, dtype=float)
    if v.size < 2:
        return 0.0
    mean = float(np.mean(v))
    if mean <= 0.0:
        return 0.0
    return float(10.0 / np.log(10.0) * _stderr(v) / mean)


def _weighted_mean(values, weights) -> float:
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    total = weights.sum()
    if total == 0.0:
        return float("nan")
    return float(np.sum(values * weights) / total)


def _aggregate_point(mode: str, sweep_db: float, payloads: list[dict], failed: int) -> dict:
    ok = len(payloads)
    row: dict = {"sweep_db": sweep_db}
    if mode == "nmse":
        vals = [p["nmse_lin"] for p in payloads]
        row["metric_mean"] = linear_mean_db(vals) if vals else float("nan")
        row["metric_stderr"] = _db_stderr(vals)
    elif mode == "param-mse":
        with_pairs = [p for p in payloads if p["n_matched"] > 0]
        w = [p["n_matched"] for p in with_pairs]
        for key, out in (
            ("mse_delay_s2", "delay_mse_s2"),
            ("mse_doppler_hz2", "doppler_mse_hz2"),
            ("mse_gain", "gain_mse"),
            ("mse_delay_grid2", "delay_mse_grid2"),
            ("mse_doppler_grid2", "doppler_mse_grid2"),
        ):
            per_trial = [p[key] for p in with_pairs]
            row[f"{out}_mean"] = _weighted_mean(per_trial, w) if per_trial else float("nan")
            row[f"{out}_stderr"] = _stderr(per_trial)
        row["misses_total"] = int(sum(p["misses"] for p in payloads))
        row["spurious_total"] = int(sum(p["spurious"] for p in payloads))
    elif mode == "ser":
        est = [p["ser_est"] for p in payloads]
        perf = [p["ser_perfect"] for p in payloads]
        row["metric_mean"] = float(np.mean(est)) if est else float("nan")
        row["metric_stderr"] = _stderr(est)
        row["ser_perfect_mean"] = float(np.mean(perf)) if perf else float("nan")
    elif mode == "oracle-check":
        agree = [p["agree"] for p in payloads]
        row["metric_mean"] = float(np.mean(agree)) if agree else float("nan")
        row["metric_stderr"] = _stderr(agree)
        row["agree_count"] = int(sum(agree))
    row["trials_ok"] = ok
    row["trials_failed"] = failed
    return row


@dataclass
class ExperimentResult:
    mode: str
    rows: list[dict]


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    """Execute all (sweep point, trial) cells and aggregate per point.

    Trials are independent and individually seeded; failures are logged and
    counted per point rather than aborting the sweep.  With workers > 1 the
    cells run in a process pool, with results re-ordered canonically so the
    output is identical to a serial run.
    """
    tasks = [
        (cfg, pi, ti) for pi in range(len(cfg.sweep_db)) for ti in range(cfg.trials)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_worker, tasks, chunksize=8))
    else:
        outcomes = [_worker(t) for t in tasks]
    outcomes.sort(key=lambda o: (o[0], o[1]))

    rows = []
    for pi, point_db in enumerate(cfg.sweep_db):
        payloads, failed = [], 0
        for o_pi, o_ti, payload, err in outcomes:
            if o_pi != pi:
                continue
            if err is None:
                payloads.append(payload)
            else:
                failed += 1
                logger.warning("trial %d at %.1f dB failed: %s", o_ti, point_db, err)
        rows.append(_aggregate_point(cfg.mode, point_db, payloads, failed))
        logger.info(
            "point %.1f dB: %d ok, %d failed", point_db, len(payloads), failed
        )
    return ExperimentResult(mode=cfg.mode, rows=rows)


# === Output writing ===========================================================

def _format_cell(value) -> str:
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def write_csv(result: ExperimentResult, path: Path):
    fields = list(result.rows[0].keys())
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        for row in result.rows:
            writer.writerow([_format_cell(row[f]) for f in fields])


def write_manifest(cfg: ExperimentConfig, result: ExperimentResult, path: Path):
    manifest = {
        "version": __version__,
        "mode": cfg.mode,
        "seed": cfg.seed,
        "config_hash": config_hash(cfg),
        "config": config_to_dict(cfg),
        "points": [
            {
                "sweep_db": row["sweep_db"],
                "trials_ok": row["trials_ok"],
                "trials_failed": row["trials_failed"],
            }
            for row in result.rows
        ],
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def write_outputs(
    cfg: ExperimentConfig,
    result: ExperimentResult,
    outdir: str | Path,
    plot: bool = True,
) -> dict[str, Path]:
    """Write results.csv and manifest.json, plus figure.png unless disabled."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = {"csv": outdir / "results.csv", "manifest": outdir / "manifest.json"}
    write_csv(result, paths["csv"])
    write_manifest(cfg, result, paths["manifest"])
    if plot:
        from .report import render_result_figure

        paths["figure"] = render_result_figure(result, outdir / "figure.png")
    return paths
