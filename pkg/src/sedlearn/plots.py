"""Figure rendering for the CLI report paths.

Every function takes the already-computed table/report objects and writes
one PNG next to the delimited output. Nothing here feeds back into the
library; analysis and metrics stay pure.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def plot_filter_peaks(reports, path):
    """Scaled magnitude-spectrum peak vs. center frequency, per matrix."""
    fig, ax = plt.subplots(figsize=(7, 3))
    for rep in reports:
        ax.plot(rep.center_hz, rep.scaled_peaks, lw=0.9, label=rep.matrix_id)
    ax.axhline(1.0, color="gray", lw=0.6, ls="--")
    ax.set_xlabel("filter center frequency [Hz]")
    ax.set_ylabel("scaled spectrum peak")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_filter_waveforms(table, path):
    """Initial vs. learned weight rows and their magnitude spectra."""
    k = len(table.filter_indices)
    fig, axes = plt.subplots(k, 2, figsize=(8, 1.6 * k), squeeze=False)
    for i, idx in enumerate(table.filter_indices):
        wave_ax, spec_ax = axes[i]
        wave_ax.plot(table.initial[i], color="tab:blue", lw=0.7, label="initial")
        wave_ax.plot(table.learned[i], color="tab:red", lw=0.7, label="learned")
        for level in (-1.0, 1.0):
            wave_ax.axhline(level, color="gray", lw=0.5, ls="--")
        wave_ax.set_ylabel(f"filter {idx}", fontsize=8)
        spec_ax.plot(table.initial_spectra[i], color="tab:blue", lw=0.7)
        spec_ax.plot(table.learned_spectra[i], color="tab:red", lw=0.7)
        if i == 0:
            wave_ax.legend(fontsize=7)
            wave_ax.set_title("weight row", fontsize=9)
            spec_ax.set_title("magnitude spectrum", fontsize=9)
    axes[-1][0].set_xlabel("sample")
    axes[-1][1].set_xlabel("frequency bin")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_mel_responses(initial, table, path):
    """Initial (top) and current (bottom) mel filterbank responses."""
    fig, (ax0, ax1) = plt.subplots(2, 1, figsize=(7, 4), sharex=True)
    for row in initial:
        ax0.plot(table.bin_hz, row, lw=0.6)
    for row in table.weights:
        ax1.plot(table.bin_hz, row, lw=0.6)
    ax0.set_ylabel("initial")
    ax1.set_ylabel("learned")
    ax1.set_xlabel("frequency [Hz]")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_training_curves(report, path):
    epochs = [e.epoch for e in report.epochs]
    fig, ax = plt.subplots(figsize=(7, 3))
    ax.plot(epochs, [e.train_loss for e in report.epochs], color="tab:blue", label="train loss")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    twin = ax.twinx()
    twin.plot(epochs, [e.val_f1 for e in report.epochs], color="tab:green", label="val F1")
    twin.plot(epochs, [e.val_er for e in report.epochs], color="tab:red", label="val ER")
    twin.set_ylabel("validation score")
    twin.axvline(report.best_epoch, color="gray", lw=0.6, ls="--")
    lines, labels = ax.get_legend_handles_labels()
    lines2, labels2 = twin.get_legend_handles_labels()
    ax.legend(lines + lines2, labels + labels2, loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_grid_results(rows, path):
    """Validation F1 per grid combination, failures marked at zero."""
    ids = [r["combo_id"] for r in rows]
    f1s = [r["val_f1"] if r["status"] == "ok" else 0.0 for r in rows]
    colors = ["tab:blue" if r["status"] == "ok" else "tab:red" for r in rows]
    fig, ax = plt.subplots(figsize=(max(6, 0.18 * len(ids)), 3))
    ax.bar(ids, f1s, color=colors)
    ax.set_xlabel("grid combination")
    ax.set_ylabel("validation F1")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
