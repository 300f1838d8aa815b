"""Report figures rendered to files next to the delimited output."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "save_profile_figure",
    "save_collapse_figure",
    "save_histogram_figure",
    "save_trace_figure",
    "save_calibration_figure",
]


def _save(fig, path) -> str:
    fig.savefig(path, dpi=150, metadata={})
    plt.close(fig)
    return str(path)


def save_profile_figure(curves: dict, path) -> str:
    """Overlay likelihood-product profiles for increasing atom counts."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for n_atoms in sorted(curves):
        curve = curves[n_atoms]
        ax.plot(curve.grid, curve.values, lw=1.2, label=f"N = {n_atoms}")
    ax.set_xlabel("photon number n (continuous)")
    ax.set_ylabel("normalized likelihood product")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def save_collapse_figure(evolutions: dict, path) -> str:
    """Mean photon number versus atom index for a few sequences."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for seq_id in sorted(evolutions):
        trace = evolutions[seq_id]
        ax.plot(np.arange(1, len(trace) + 1), trace.mean_n, lw=1.0, label=f"seq {seq_id}")
    ax.set_xlabel("atom number N")
    ax.set_ylabel("decoded mean photon number")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def save_histogram_figure(hist, fit, path) -> str:
    """Mean-photon histogram with the fitted Poisson peaks."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(hist.centers, hist.masses, width=hist.bin_width * 0.9, color="0.7",
           label="decoded means")
    integers = np.arange(fit.peak_masses.size)
    ax.plot(integers, fit.predicted_peaks(folded=True), "o", color="tab:blue",
            label=f"folded Poisson fit, mean {fit.lambda_hat:.2f}")
    ax.set_xlabel("mean photon number")
    ax.set_ylabel("probability")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def save_trace_figure(trace, staircase, truth, path) -> str:
    """Sliding-window decoded mean over time, with the extracted staircase and
    (when available) the truth jump log."""
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(trace.t, trace.mean_n, lw=0.8, color="0.5", label="decoded mean")
    if staircase is not None and staircase.steps:
        xs, ys = [], []
        for step in staircase.steps:
            xs += [step.t_start, step.t_end]
            ys += [step.level, step.level]
        ax.plot(xs, ys, lw=1.5, color="tab:red", label="staircase")
    if truth:
        times = [e.t for e in truth] + [max(trace.t[-1], truth[-1].t)]
        levels = [e.n_after for e in truth]
        ax.step(times, levels + [levels[-1]], where="post", lw=1.0,
                color="tab:green", alpha=0.7, label="truth")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("photon number")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def save_calibration_figure(samples, fit, path) -> str:
    """Spin-up fraction histograms per detection angle with fitted peak positions."""
    fig, axes = plt.subplots(2, 2, figsize=(8, 6), sharex=True)
    labels = "abcd"
    for idx, ax in enumerate(axes.ravel()):
        fractions = [eta for eta, _ in samples.fractions[idx]]
        if fractions:
            ax.hist(fractions, bins=40, range=(0, 1), color="0.7")
        if fit is not None:
            n = np.arange(5)
            mu = 0.5 * (fit.params.offset + fit.params.contrast
                        * np.cos(n * fit.params.shift_per_photon - fit.params.phases[idx]))
            for value in mu:
                ax.axvline(value, color="tab:blue", lw=0.8)
        ax.set_title(f"angle {labels[idx]}", fontsize=9)
    fig.supxlabel("fraction of atoms found in j = 0")
    fig.supylabel("batches")
    fig.tight_layout()
    return _save(fig, path)
