"""Inspection of learned front-end parameters as plot-ready tables.

Three views mirror the qualitative analyses of the learned block:

* per-filter magnitude-spectrum peaks of the cosine/sine weight rows and
  of their complex combination (peaks scaled so every untrained filter
  reads exactly 1.0),
* the weight-row waveforms and spectra, initial vs. current,
* the mel filterbank responses.

The DC row (filter 0) is omitted from the peak report: its cosine row is
a constant (scaled peak 2 under the sinusoid normalization) and its sine
row is identically zero, so the "untrained peak equals 1" convention only
holds for the true sinusoids.

Scaling conventions: one-sided sinusoid rows use 2/N; the complex
combination uses 1/N. Both are restated in the CSV headers.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .frontend import FrontendMode, init_dft_weights

MATRIX_IDS = ("re", "im", "complex")


@dataclass
class FilterSpectrumReport:
    """Per-filter spectral peaks of one weight matrix."""

    matrix_id: str
    filter_indices: np.ndarray  # (K,)
    center_hz: np.ndarray  # (K,)
    peak_bins: np.ndarray  # (K,) argmax over the one-sided spectrum
    scaled_peaks: np.ndarray  # (K,)
    spectra: np.ndarray  # (K, N/2) scaled one-sided magnitude spectra
    scale: float

    def moved_peaks(self):
        """Filters whose spectral peak left the center bin (flagged, not asserted)."""
        return self.filter_indices[self.peak_bins != self.filter_indices]


@dataclass
class FilterWaveformTable:
    filter_indices: np.ndarray
    initial: np.ndarray  # (K, N) weight rows at initialization
    learned: np.ndarray  # (K, N) current weight rows
    initial_spectra: np.ndarray  # (K, N/2)
    learned_spectra: np.ndarray  # (K, N/2)


@dataclass
class MelResponseTable:
    bin_hz: np.ndarray  # (N/2,)
    weights: np.ndarray  # (M, N/2) current rows


def filter_spectrum_peaks(params, which):
    """Magnitude-spectrum peaks of each trained weight row.

    ``which`` is one of re/im/complex; complex combines the row pair as
    w_re + i*w_im. Rows 1..N/2-1 are reported, ordered by center
    frequency.
    """
    if which not in MATRIX_IDS:
        raise ConfigError(f"matrix id must be one of {MATRIX_IDS}, got '{which}'")
    n = params.n
    half = n // 2
    if which == "re":
        rows = params.w_re.values
        scale = 2.0 / n
    elif which == "im":
        rows = params.w_im.values
        scale = 2.0 / n
    else:
        rows = params.w_re.values + 1j * params.w_im.values
        scale = 1.0 / n
    indices = np.arange(1, half)
    spectra = np.abs(np.fft.fft(rows[1:], n=n, axis=1))[:, :half] * scale
    peak_bins = np.argmax(spectra, axis=1)
    scaled_peaks = spectra[np.arange(len(indices)), peak_bins]
    center_hz = indices * params.sample_rate / n
    return FilterSpectrumReport(
        matrix_id=which,
        filter_indices=indices,
        center_hz=center_hz,
        peak_bins=peak_bins,
        scaled_peaks=scaled_peaks,
        spectra=spectra,
        scale=scale,
    )


def filter_waveform_dump(params, filter_indices):
    """Initial vs. current weight rows and spectra for selected filters."""
    half = params.n // 2
    indices = np.asarray(list(filter_indices), dtype=int)
    if indices.size == 0:
        raise ConfigError("no filter indices given")
    if np.any((indices < 0) | (indices >= half)):
        raise ConfigError(
            f"filter indices must lie in [0, {half}), got {indices.tolist()}"
        )
    w_re0, _ = init_dft_weights(params.n)
    initial = w_re0[indices]
    learned = params.w_re.values[indices]
    scale = 2.0 / params.n
    return FilterWaveformTable(
        filter_indices=indices,
        initial=initial,
        learned=learned,
        initial_spectra=np.abs(np.fft.fft(initial, axis=1))[:, :half] * scale,
        learned_spectra=np.abs(np.fft.fft(learned, axis=1))[:, :half] * scale,
    )


def mel_response_dump(params):
    """Current mel filterbank rows with a bin -> Hz axis."""
    if params.mode not in (FrontendMode.MEL, FrontendMode.LOGMEL):
        raise ConfigError(
            f"mode {params.mode.name} has no mel layer to dump"
        )
    half = params.n // 2
    bin_hz = np.arange(half) * params.sample_rate / params.n
    return MelResponseTable(bin_hz=bin_hz, weights=params.w_mel.values.copy())


def off_peak_mass(report):
    """Spectral mass away from each filter's peak bin (0 for pure sinusoids)."""
    masked = report.spectra.copy()
    masked[np.arange(masked.shape[0]), report.peak_bins] = 0.0
    return masked.sum(axis=1)


def peak_change_by_band(trained, initial, center_hz, low_hz=3000.0, high_hz=4000.0):
    """Cumulative |peak change| below ``low_hz`` vs. above ``high_hz``."""
    delta = np.abs(np.asarray(trained) - np.asarray(initial))
    low = float(delta[center_hz < low_hz].sum())
    high = float(delta[center_hz > high_hz].sum())
    return low, high


# -- CSV writers (fixed column schemas) --------------------------------------------


def write_peaks_csv(path, reports):
    with open(path, "w", newline="") as fh:
        fh.write(
            "# scaled_peak scaling: 2/N for re and im rows, 1/N for the complex "
            "combination; untrained filters read 1.0\n"
            "# filter 0 (DC row) omitted: it is not a sinusoid\n"
        )
        writer = csv.writer(fh)
        writer.writerow(["matrix_id", "filter_index", "center_hz", "scaled_peak"])
        for rep in reports:
            for i, k in enumerate(rep.filter_indices):
                writer.writerow(
                    [rep.matrix_id, int(k), repr(float(rep.center_hz[i])),
                     repr(float(rep.scaled_peaks[i]))]
                )


def write_melresp_csv(path, table):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["filter_index", "bin_hz", "weight"])
        for m in range(table.weights.shape[0]):
            for k in range(table.weights.shape[1]):
                writer.writerow(
                    [m, repr(float(table.bin_hz[k])), repr(float(table.weights[m, k]))]
                )


def write_filters_csv(path, table):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["filter_index", "sample_index", "initial", "learned"])
        for i, k in enumerate(table.filter_indices):
            for s in range(table.initial.shape[1]):
                writer.writerow(
                    [int(k), s, repr(float(table.initial[i, s])),
                     repr(float(table.learned[i, s]))]
                )


def write_filter_spectra_csv(path, table):
    with open(path, "w", newline="") as fh:
        fh.write("# one-sided magnitude spectra of the rows in filters.csv, scaled by 2/N\n")
        writer = csv.writer(fh)
        writer.writerow(["filter_index", "bin_index", "initial", "learned"])
        for i, k in enumerate(table.filter_indices):
            for b in range(table.initial_spectra.shape[1]):
                writer.writerow(
                    [int(k), b, repr(float(table.initial_spectra[i, b])),
                     repr(float(table.learned_spectra[i, b]))]
                )
