"""Delay-Doppler channel estimation with fractional-effect templates.

The package models sparse multipath channels on a delay-Doppler grid,
including the leakage produced by delays and Doppler shifts that fall
between grid points, and estimates path parameters from a single-impulse
pilot via separable template matching with sequential interference
elimination.  A Monte-Carlo harness sweeps SNR points and reports NMSE,
per-parameter MSE, and symbol error rates.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    GainSingularError,
    GridMismatchError,
    LeakageUndefinedError,
)
from .grid import (
    SPEED_OF_LIGHT,
    DdGrid,
    DdMatrix,
    PathParams,
    PhysicalPath,
    invec,
    physical_units,
    vec,
    wrap_centered,
    wrap_delay,
    wrap_doppler,
)
from .channel import (
    NoiseConfig,
    ScenarioConfig,
    add_awgn,
    apply_channel,
    generate_dd_channel,
    periodic_sum_kernel,
    sample_scenario,
)
from .transceiver import (
    QAM_CONSTELLATIONS,
    DataFrame,
    PilotConfig,
    build_effective_matrix,
    lmmse_detect,
    make_data_frame,
    make_pilot_frame,
    recover_effective_channel,
)
from .estimator import (
    PathEstimate,
    SearchConfig,
    TapLocation,
    delay_template,
    doppler_template,
    estimate_delay_doppler,
    estimate_gain,
    estimate_sequential,
    extract_paths,
    leakage_score,
    reconstruct_channel,
    reconstruct_path_channel,
)
from .metrics import (
    NMSE_FLOOR_DB,
    TrialScore,
    associate_and_score,
    joint_grid_oracle,
    nmse_db,
    ser,
)
from .harness import (
    MODES,
    ExperimentConfig,
    ExperimentResult,
    default_config,
    dump_default_config,
    load_config,
    parse_config,
    run_experiment,
    write_outputs,
)

__all__ = [
    "SPEED_OF_LIGHT",
    "NMSE_FLOOR_DB",
    "MODES",
    "QAM_CONSTELLATIONS",
    "ConfigError",
    "GainSingularError",
    "GridMismatchError",
    "LeakageUndefinedError",
    "DdGrid",
    "DdMatrix",
    "PathParams",
    "PhysicalPath",
    "vec",
    "invec",
    "wrap_doppler",
    "wrap_delay",
    "wrap_centered",
    "physical_units",
    "NoiseConfig",
    "ScenarioConfig",
    "periodic_sum_kernel",
    "generate_dd_channel",
    "apply_channel",
    "add_awgn",
    "sample_scenario",
    "PilotConfig",
    "DataFrame",
    "make_pilot_frame",
    "recover_effective_channel",
    "make_data_frame",
    "build_effective_matrix",
    "lmmse_detect",
    "TapLocation",
    "SearchConfig",
    "PathEstimate",
    "extract_paths",
    "doppler_template",
    "delay_template",
    "estimate_delay_doppler",
    "estimate_gain",
    "leakage_score",
    "reconstruct_path_channel",
    "reconstruct_channel",
    "estimate_sequential",
    "TrialScore",
    "nmse_db",
    "associate_and_score",
    "joint_grid_oracle",
    "ser",
    "ExperimentConfig",
    "ExperimentResult",
    "default_config",
    "dump_default_config",
    "load_config",
    "parse_config",
    "run_experiment",
    "write_outputs",
]
