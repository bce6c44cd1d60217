"""Figure rendering for sweeps, scans and fit reports (SVG via Agg).

Figures are written next to the delimited output.  Rendering is
deterministic: the SVG hash salt is pinned and the creation date is
suppressed, so repeated runs produce byte-identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

plt.rcParams.update({
    "svg.hashsalt": "vaporlens",
    "figure.constrained_layout.use": True,
    "axes.grid": True,
    "grid.alpha": 0.3,
})

__all__ = ["chi_sweep_figure", "scan_figure", "fit_figure", "save_figure"]


def save_figure(fig, path):
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)


def chi_sweep_figure(deltas, chi_re, chi_im, crossings=()):
    """Real/imaginary susceptibility versus detuning."""
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    ax.plot(deltas, chi_re, label=r"$\chi'$", color="tab:blue")
    ax.plot(deltas, chi_im, label=r"$\chi''$", color="tab:red", ls="--")
    for x in crossings:
        ax.axvline(x, color="0.4", lw=0.8, ls=":")
    ax.axhline(0.0, color="0.7", lw=0.8)
    ax.set_xlabel("probe detuning (MHz)")
    ax.set_ylabel("susceptibility")
    ax.legend(loc="upper right")
    return fig


def scan_figure(records, pinhole: bool):
    """Intensity scan (one panel) or intensity + pinhole (two panels)."""
    deltas = np.array([r.delta_mhz for r in records])
    ratios = np.array([r.intensity_ratio for r in records])
    if not pinhole:
        fig, ax = plt.subplots(figsize=(6.0, 3.6))
        axes = [ax]
    else:
        fig, axes = plt.subplots(2, 1, sharex=True, figsize=(6.0, 5.6))
    axes[0].plot(deltas, ratios, ".-", ms=3, color="tab:blue")
    axes[0].axhline(1.0, color="0.7", lw=0.8)
    axes[0].set_ylabel("peak intensity ratio")
    if pinhole:
        norm = np.array([r.pinhole_norm for r in records])
        axes[1].plot(deltas, norm, ".-", ms=3, color="tab:green")
        axes[1].set_ylabel("pinhole transmission\n(gain/loss removed)")
    axes[-1].set_xlabel("probe detuning (MHz)")
    return fig


def fit_figure(data, result, chi_curve=None):
    """Data with the fitted curve; optionally the implied chi' below."""
    from .fitting import forward_model

    n_rows = 2 if chi_curve is not None else 1
    fig, axes = plt.subplots(n_rows, 1, sharex=True,
                             figsize=(6.0, 3.2 * n_rows), squeeze=False)
    ax = axes[0, 0]
    ax.plot(data.freqs, data.values, ".", ms=3, color="0.3", label="data")
    ax.plot(data.freqs, forward_model(result.params, data.freqs),
            color="tab:red", label="fit")
    ax.set_ylabel("intensity ratio")
    ax.legend(loc="best")
    if chi_curve is not None:
        freqs, chi_re, _ = chi_curve
        axes[1, 0].plot(freqs, chi_re, color="tab:blue")
        axes[1, 0].set_ylabel(r"fitted $\chi'$")
    axes[-1, 0].set_xlabel("probe detuning (MHz)")
    return fig
