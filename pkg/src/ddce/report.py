"""Figure rendering for experiment result tables.

Each run writes one PNG next to the CSV so sweeps can be eyeballed without
extra tooling; the CSV stays the canonical machine-readable output.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_FIGSIZE = (6.0, 4.0)
_DPI = 150


def _column(rows, key):
    return [row[key] for row in rows]


def render_result_figure(result, path: str | Path) -> Path:
    """Render the sweep summary for one ExperimentResult to a PNG file."""
    path = Path(path)
    rows = result.rows
    sweep = _column(rows, "sweep_db")

    if result.mode == "param-mse":
        fig, axes = plt.subplots(1, 3, figsize=(12.0, 3.6))
        panels = [
            ("delay_mse_s2_mean", "delay MSE [s$^2$]"),
            ("doppler_mse_hz2_mean", "Doppler MSE [Hz$^2$]"),
            ("gain_mse_mean", "gain MSE"),
        ]
        for ax, (key, label) in zip(axes, panels):
            ax.semilogy(sweep, _column(rows, key), marker="o")
            ax.set_xlabel("pilot SNR [dB]")
            ax.set_ylabel(label)
            ax.grid(True, which="both", alpha=0.4)
        fig.suptitle("Path-parameter estimation error vs pilot SNR")
    else:
        fig, ax = plt.subplots(figsize=_FIGSIZE)
        if result.mode == "nmse":
            yerr = _column(rows, "metric_stderr")
            ax.errorbar(sweep, _column(rows, "metric_mean"), yerr=yerr, marker="o")
            ax.set_xlabel("pilot SNR [dB]")
            ax.set_ylabel("channel NMSE [dB]")
            ax.set_title("Channel estimation NMSE vs pilot SNR")
        elif result.mode == "ser":
            ax.semilogy(sweep, _column(rows, "metric_mean"), marker="o", label="estimated CSI")
            ax.semilogy(
                sweep, _column(rows, "ser_perfect_mean"), marker="s", label="perfect CSI"
            )
            ax.set_xlabel("SNR [dB]")
            ax.set_ylabel("symbol error rate")
            ax.set_title("LMMSE detection SER vs SNR")
            ax.legend()
        else:  # oracle-check
            ax.plot(sweep, _column(rows, "metric_mean"), marker="o")
            ax.set_ylim(0.0, 1.05)
            ax.set_xlabel("sweep point [dB]")
            ax.set_ylabel("agreement fraction")
            ax.set_title("Separable vs joint search agreement")
        ax.grid(True, alpha=0.4)

    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path
