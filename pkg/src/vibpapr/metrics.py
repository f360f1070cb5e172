"""Amplitude constellations, EVM, Welch PSD, denoising SNR and power ratios."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSignalError, ParameterError
from .fft import next_pow2, rfft
from .signal_core import SignalSet


def _matrix(data) -> np.ndarray:
    if isinstance(data, SignalSet):
        return data.matrix
    return np.atleast_2d(np.asarray(data, dtype=np.float64))


# -- constellations -------------------------------------------------------------

@dataclass(frozen=True)
class Constellation:
    """Per-signal (peak amplitude, mean amplitude) points in set order."""

    peak_amp: np.ndarray
    mean_amp: np.ndarray
    labels: tuple = ()
    source_tag: str = ""

    def __post_init__(self):
        p = np.asarray(self.peak_amp, dtype=np.float64).reshape(-1)
        m = np.asarray(self.mean_amp, dtype=np.float64).reshape(-1)
        if p.shape != m.shape:
            raise ParameterError("peak and mean arrays differ in length")
        if np.any(m < 0) or np.any(p < m * (1 - 1e-12)):
            raise ParameterError("every point needs peak_amp >= mean_amp >= 0")
        labels = tuple(self.labels) if self.labels else (None,) * p.size
        if len(labels) != p.size:
            raise ParameterError("one label per point is required")
        object.__setattr__(self, "peak_amp", p)
        object.__setattr__(self, "mean_amp", m)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.peak_amp.size

    @property
    def points(self) -> list[tuple[float, float, str | None]]:
        return [(float(p), float(m), lab) for p, m, lab in zip(self.peak_amp, self.mean_amp, self.labels)]

    def scaled(self, c: float) -> "Constellation":
        return Constellation(self.peak_amp * c, self.mean_amp * c, self.labels, self.source_tag)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "peak_amp", "mean_amp", "label", "source"])
            for i, (p, m, lab) in enumerate(self.points):
                w.writerow([i, repr(p), repr(m), "" if lab is None else lab, self.source_tag])


def constellation(data, labels=None, source_tag: str = "") -> Constellation:
    mat = _matrix(data)
    if mat.shape[0] == 0:
        raise ParameterError("constellation of an empty set")
    if labels is None and isinstance(data, SignalSet):
        labels = data.labels
    a = np.abs(mat)
    return Constellation(a.max(axis=1), a.mean(axis=1), tuple(labels or ()), source_tag)


def error_vectors(con_amp: Constellation, con_ref: Constellation) -> np.ndarray:
    """(V, 2) array of (peak, mean) differences, ``con_amp - con_ref``, pointwise in order."""
    if len(con_amp) != len(con_ref):
        raise ParameterError(f"constellations hold {len(con_amp)} and {len(con_ref)} points")
    return np.column_stack((con_amp.peak_amp - con_ref.peak_amp, con_amp.mean_amp - con_ref.mean_amp))


def evm(vectors, con_ref: Constellation, statistic: str = "rms") -> float:
    """Error-vector magnitude in percent of the largest reference point magnitude."""
    v = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    if v.size == 0 or len(con_ref) == 0:
        raise ParameterError("evm needs non-empty vectors and reference")
    norm_ref = float(np.max(np.hypot(con_ref.peak_amp, con_ref.mean_amp)))
    if norm_ref == 0:
        raise DegenerateSignalError("reference constellation has zero magnitude")
    mags = np.hypot(v[:, 0], v[:, 1])
    if statistic == "rms":
        stat = math.sqrt(float(np.mean(mags * mags)))
    elif statistic == "mean":
        stat = float(np.mean(mags))
    else:
        raise ParameterError(f"statistic must be 'rms' or 'mean', got {statistic!r}")
    return 100.0 * stat / norm_ref


def evm_between(processed, reference, statistic: str = "rms") -> float:
    ref = constellation(reference)
    return evm(error_vectors(constellation(processed), ref), ref, statistic)


# -- spectra ----------------------------------------------------------------------

@dataclass(frozen=True)
class PsdEstimate:
    freqs_hz: np.ndarray
    density: np.ndarray
    window_len: int
    overlap_fraction: float
    nfft: int
    n_averaged: int = 1
    meta: dict = field(default_factory=dict)

    def integrate(self, f_lo: float = 0.0, f_hi: float | None = None) -> float:
        """Rectangle-rule power between two frequencies (inclusive bins)."""
        f_hi = self.freqs_hz[-1] if f_hi is None else f_hi
        sel = (self.freqs_hz >= f_lo) & (self.freqs_hz <= f_hi)
        df = self.freqs_hz[1] - self.freqs_hz[0]
        return float(np.sum(self.density[sel]) * df)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["freq_hz", "density"])
            for f, d in zip(self.freqs_hz, self.density):
                w.writerow([repr(float(f)), repr(float(d))])


def hamming(m: int) -> np.ndarray:
    """Periodic Hamming window (the DFT-even form used for spectral estimation)."""
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * np.arange(m) / m)


def default_nfft(n: int) -> int:
    return next_pow2(n)


def _welch_settings(n: int, window_len, overlap_fraction, nfft):
    window_len = n // 2 if window_len is None else int(window_len)
    nfft = default_nfft(n) if nfft is None else int(nfft)
    if not 1 <= window_len <= n:
        raise ParameterError(f"window_len must lie in [1, {n}], got {window_len}")
    if not 0.0 <= overlap_fraction < 1.0:
        raise ParameterError(f"overlap_fraction must lie in [0, 1), got {overlap_fraction}")
    if nfft < window_len or nfft & (nfft - 1):
        raise ParameterError(f"nfft must be a power of two >= window_len, got {nfft}")
    step = window_len - int(round(overlap_fraction * window_len))
    step = max(step, 1)
    starts = np.arange(0, n - window_len + 1, step)
    return window_len, nfft, starts


def _welch_rows(mat: np.ndarray, fs: float, window_len: int, nfft: int, starts: np.ndarray) -> np.ndarray:
    win = hamming(window_len)
    scale = 1.0 / (fs * np.sum(win * win))
    acc = np.zeros((mat.shape[0], nfft // 2 + 1))
    for s in starts:
        spec = rfft(mat[:, s:s + window_len] * win, nfft)
        acc += (spec.real ** 2 + spec.imag ** 2)
    dens = acc * (scale / len(starts))
    dens[:, 1:] *= 2.0
    if nfft % 2 == 0:
        dens[:, -1] /= 2.0
    return dens


def welch_psd(signal, sample_rate_hz: float | None = None, window: str = "hamming",
              window_len: int | None = None, overlap_fraction: float = 0.5,
              nfft: int | None = None) -> PsdEstimate:
    """One-sided Welch density: Hamming windows of N/2, 50 % overlap, next-power-of-two FFT.

    The density is normalized by the window energy so its integral over
    frequency equals the mean power of the signal.
    """
    if window != "hamming":
        raise ParameterError(f"only the Hamming window is supported, got {window!r}")
    fs = getattr(signal, "sample_rate_hz", 1.0) if sample_rate_hz is None else sample_rate_hz
    if not fs > 0:
        raise ParameterError("sample rate must be positive")
    x = np.asarray(signal, dtype=np.float64).reshape(1, -1)
    wl, nf, starts = _welch_settings(x.shape[1], window_len, overlap_fraction, nfft)
    dens = _welch_rows(x, fs, wl, nf, starts)[0]
    freqs = np.arange(nf // 2 + 1) * (fs / nf)
    return PsdEstimate(freqs, dens, wl, overlap_fraction, nf, len(starts))


def mean_psd(data, sample_rate_hz: float | None = None, window_len: int | None = None,
             overlap_fraction: float = 0.5, nfft: int | None = None, chunk: int = 256) -> PsdEstimate:
    """Elementwise mean of the per-signal Welch densities, accumulated in set order."""
    mat = _matrix(data)
    if mat.shape[0] == 0:
        raise ParameterError("mean_psd of an empty set")
    if isinstance(data, SignalSet) and sample_rate_hz is None:
        sample_rate_hz = data.sample_rate_hz
    fs = 1.0 if sample_rate_hz is None else sample_rate_hz
    wl, nf, starts = _welch_settings(mat.shape[1], window_len, overlap_fraction, nfft)
    total = np.zeros(nf // 2 + 1)
    for lo in range(0, mat.shape[0], chunk):
        total += _welch_rows(mat[lo:lo + chunk], fs, wl, nf, starts).sum(axis=0)
    freqs = np.arange(nf // 2 + 1) * (fs / nf)
    return PsdEstimate(freqs, total / mat.shape[0], wl, overlap_fraction, nf, len(starts))


def highband_power(psd: PsdEstimate, quantile: float = 0.9) -> float:
    """Density integrated above the given fraction of the Nyquist band.

    A scalar proxy for spectral spreading; higher means more side-lobe regrowth.
    """
    f_cut = quantile * psd.freqs_hz[-1]
    return psd.integrate(f_cut, None)


# -- SNR and power ----------------------------------------------------------------

def snr_d(original, denoised) -> float:
    """``10 log10(sum x^2 / sum (x - x')^2)``; +inf when the reconstruction is exact."""
    x = np.asarray(original, dtype=np.float64).reshape(-1)
    xd = np.asarray(denoised, dtype=np.float64).reshape(-1)
    if x.shape != xd.shape:
        raise ParameterError(f"lengths differ: {x.size} vs {xd.size}")
    sig = float(np.sum(x * x))
    if sig == 0:
        raise DegenerateSignalError("original signal has zero power")
    err = float(np.sum((x - xd) ** 2))
    if err == 0:
        return math.inf
    return 10.0 * math.log10(sig / err)


def snr_d_rows(original, denoised) -> np.ndarray:
    x, xd = _matrix(original), _matrix(denoised)
    if x.shape != xd.shape:
        raise ParameterError(f"shapes differ: {x.shape} vs {xd.shape}")
    sig = np.sum(x * x, axis=1)
    if np.any(sig == 0):
        raise DegenerateSignalError("an original signal has zero power")
    err = np.sum((x - xd) ** 2, axis=1)
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(sig / err)


def avg_power_ratio(set_a, set_b) -> float:
    """Mean per-signal average power of ``set_a`` over that of ``set_b``."""
    a, b = _matrix(set_a), _matrix(set_b)
    if a.size == 0 or b.size == 0:
        raise ParameterError("avg_power_ratio needs non-empty sets")
    pb = float(np.mean(np.mean(b * b, axis=1)))
    if pb == 0:
        raise DegenerateSignalError("reference set has zero power")
    return float(np.mean(np.mean(a * a, axis=1))) / pb
