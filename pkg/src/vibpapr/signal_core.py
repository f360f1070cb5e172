"""Signal containers, ingestion, segmentation, smoothing and synthetic vibration."""
from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import FormatError, ParameterError

BUNDLE_VERSION = 1


def _as_samples(values, name: str = "samples") -> np.ndarray:
    arr = np.array(values, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise FormatError(f"{name}: non-finite value at index {int(np.argmin(np.isfinite(arr)))}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class VibrationSignal:
    """One fixed-length real vibration record."""

    samples: np.ndarray
    sample_rate_hz: float = 1.0
    label: str | None = None

    def __post_init__(self):
        arr = _as_samples(self.samples)
        if arr.size < 2:
            raise ParameterError(f"a signal needs at least 2 samples, got {arr.size}")
        if not (self.sample_rate_hz > 0 and np.isfinite(self.sample_rate_hz)):
            raise ParameterError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))

    def __len__(self) -> int:
        return self.samples.size

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.samples
        return self.samples.astype(dtype)

    def with_samples(self, samples) -> "VibrationSignal":
        return VibrationSignal(samples, self.sample_rate_hz, self.label)


@dataclass(frozen=True)
class SignalSet:
    """Ordered collection of equal-length signals sharing one sample rate."""

    signals: tuple[VibrationSignal, ...]
    segment_len: int
    source_id: str = ""
    _matrix: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        sigs = tuple(self.signals)
        if not sigs:
            raise ParameterError("a SignalSet needs at least one signal")
        n = len(sigs[0])
        fs = sigs[0].sample_rate_hz
        for i, s in enumerate(sigs):
            if len(s) != n:
                raise ParameterError(f"signal {i} has length {len(s)}, expected {n}")
            if s.sample_rate_hz != fs:
                raise ParameterError(f"signal {i} has sample rate {s.sample_rate_hz}, expected {fs}")
        if int(self.segment_len) != n:
            raise ParameterError(f"segment_len {self.segment_len} does not match signal length {n}")
        object.__setattr__(self, "signals", sigs)
        object.__setattr__(self, "segment_len", int(self.segment_len))
        mat = np.stack([s.samples for s in sigs])
        mat.setflags(write=False)
        object.__setattr__(self, "_matrix", mat)

    @classmethod
    def from_matrix(
        cls,
        matrix,
        sample_rate_hz: float = 1.0,
        labels: Sequence[str | None] | None = None,
        source_id: str = "",
    ) -> "SignalSet":
        mat = np.asarray(matrix, dtype=np.float64)
        if mat.ndim == 1:
            mat = mat[None, :]
        if mat.ndim != 2:
            raise ParameterError(f"expected a 2-D signals x samples array, got shape {mat.shape}")
        if labels is None:
            labels = [None] * mat.shape[0]
        if len(labels) != mat.shape[0]:
            raise ParameterError(f"{len(labels)} labels for {mat.shape[0]} signals")
        sigs = tuple(VibrationSignal(row, sample_rate_hz, lab) for row, lab in zip(mat, labels))
        return cls(sigs, mat.shape[1], source_id)

    def __len__(self) -> int:
        return len(self.signals)

    def __iter__(self):
        return iter(self.signals)

    def __getitem__(self, i):
        return self.signals[i]

    @property
    def matrix(self) -> np.ndarray:
        """Read-only (n_signals, n_samples) view of all samples."""
        return self._matrix

    @property
    def sample_rate_hz(self) -> float:
        return self.signals[0].sample_rate_hz

    @property
    def labels(self) -> list[str | None]:
        return [s.label for s in self.signals]

    def map_matrix(self, fn, source_id: str | None = None) -> "SignalSet":
        """Apply ``fn`` to the whole sample matrix and rewrap with the same metadata."""
        out = np.asarray(fn(self.matrix), dtype=np.float64)
        if out.shape != self.matrix.shape:
            raise ParameterError(f"mapped matrix has shape {out.shape}, expected {self.matrix.shape}")
        return SignalSet.from_matrix(out, self.sample_rate_hz, self.labels,
                                     self.source_id if source_id is None else source_id)

    def subset(self, indices: Iterable[int], source_id: str | None = None) -> "SignalSet":
        idx = list(indices)
        return SignalSet(tuple(self.signals[i] for i in idx), self.segment_len,
                         self.source_id if source_id is None else source_id)


def synth_gaussian_vibration(n_samples: int, sigma: float, seed: int,
                             sample_rate_hz: float = 1.0) -> VibrationSignal:
    """I.i.d. zero-mean Gaussian samples with standard deviation ``sigma``."""
    if int(n_samples) != n_samples or n_samples < 2:
        raise ParameterError(f"n_samples must be an integer >= 2, got {n_samples}")
    if not sigma > 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    rng = np.random.default_rng(seed)
    return VibrationSignal(sigma * rng.standard_normal(int(n_samples)), sample_rate_hz, "gaussian")


def synth_gaussian_set(n_signals: int, n_samples: int, sigma: float, seed: int,
                       sample_rate_hz: float = 1.0) -> SignalSet:
    """``n_signals`` independent white Gaussian records drawn from one seeded stream."""
    if n_signals < 1:
        raise ParameterError(f"n_signals must be >= 1, got {n_signals}")
    if n_samples < 2:
        raise ParameterError(f"n_samples must be >= 2, got {n_samples}")
    if not sigma > 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    rng = np.random.default_rng(seed)
    mat = sigma * rng.standard_normal((int(n_signals), int(n_samples)))
    return SignalSet.from_matrix(mat, sample_rate_hz, ["gaussian"] * int(n_signals),
                                 f"gaussian(seed={seed})")


def synth_vibration_corpus(n_signals: int, n_samples: int, seed: int, sigma: float = 1.0,
                           corr_len: int = 8, noise_snr_db: float = 20.0,
                           sample_rate_hz: float = 64_000.0) -> SignalSet:
    """Band-limited Gaussian vibration plus white measurement noise.

    White noise is shaped by a Hann FIR of ``corr_len`` taps normalized to unit
    gain in power, so every sample stays Gaussian with variance ``sigma**2``.
    Measurement noise is added at ``noise_snr_db`` relative to that variance.
    """
    if n_signals < 1 or n_samples < 2:
        raise ParameterError("need n_signals >= 1 and n_samples >= 2")
    if not sigma > 0 or corr_len < 1:
        raise ParameterError("sigma must be positive and corr_len >= 1")
    rng = np.random.default_rng(seed)
    taps = np.hanning(corr_len + 2)[1:-1]
    taps /= np.sqrt(np.sum(taps ** 2))
    white = rng.standard_normal((int(n_signals), int(n_samples) + corr_len - 1))
    win = np.lib.stride_tricks.sliding_window_view(white, corr_len, axis=1)
    clean = sigma * (win @ taps[::-1])
    noise_std = sigma * 10.0 ** (-noise_snr_db / 20.0)
    mat = clean + noise_std * rng.standard_normal(clean.shape)
    return SignalSet.from_matrix(mat, sample_rate_hz, ["synthetic"] * int(n_signals),
                                 f"vibration(seed={seed},corr_len={corr_len},snr={noise_snr_db})")


def segment(long_signal: VibrationSignal, segment_len: int, source_id: str = "") -> SignalSet:
    """Cut consecutive non-overlapping windows; a short tail is dropped."""
    if int(segment_len) != segment_len or segment_len < 2:
        raise ParameterError(f"segment_len must be an integer >= 2, got {segment_len}")
    x = np.asarray(long_signal, dtype=np.float64)
    if segment_len > x.size:
        raise ParameterError(f"segment_len {segment_len} exceeds signal length {x.size}")
    n_seg = x.size // int(segment_len)
    mat = x[: n_seg * int(segment_len)].reshape(n_seg, int(segment_len))
    label = getattr(long_signal, "label", None)
    fs = getattr(long_signal, "sample_rate_hz", 1.0)
    return SignalSet.from_matrix(mat, fs, [label] * n_seg, source_id)


def smooth_array(x, window_len: int = 9) -> np.ndarray:
    """Centered moving average along the last axis with reflect padding."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    if int(window_len) != window_len or window_len < 1 or window_len % 2 == 0:
        raise ParameterError(f"window_len must be an odd positive integer, got {window_len}")
    if window_len >= n and window_len != 1:
        raise ParameterError(f"window_len {window_len} must be shorter than the signal ({n})")
    if window_len == 1:
        return x.copy()
    half = window_len // 2
    pad = [(0, 0)] * (x.ndim - 1) + [(half, half)]
    xp = np.pad(x, pad, mode="reflect")
    return np.lib.stride_tricks.sliding_window_view(xp, window_len, axis=-1).mean(axis=-1)


def smooth(signal, window_len: int = 9):
    """Zero-phase moving average; accepts a VibrationSignal, SignalSet or array."""
    if isinstance(signal, SignalSet):
        return signal.map_matrix(lambda m: smooth_array(m, window_len))
    if isinstance(signal, VibrationSignal):
        return signal.with_samples(smooth_array(signal.samples, window_len))
    return smooth_array(signal, window_len)


def concatenate(sset: SignalSet) -> VibrationSignal:
    return VibrationSignal(sset.matrix.reshape(-1), sset.sample_rate_hz, sset.signals[0].label)


# -- bundle files -----------------------------------------------------------

def _header_path(path) -> Path:
    return Path(str(path) + ".json")


def save_bundle(sset: SignalSet, path) -> None:
    """Write ``path`` (raw little-endian float64, row-major) and ``path.json``."""
    path = Path(path)
    header = {
        "version": BUNDLE_VERSION,
        "n_signals": len(sset),
        "n_samples": sset.segment_len,
        "sample_rate_hz": sset.sample_rate_hz,
        "labels": sset.labels,
        "source_id": sset.source_id,
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    sset.matrix.astype("<f8").tofile(path)
    with open(_header_path(path), "w") as fh:
        json.dump(header, fh, indent=1)


def load_bundle(path) -> SignalSet:
    path = Path(path)
    try:
        with open(_header_path(path)) as fh:
            header = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"header: invalid JSON ({exc})") from exc
    if not isinstance(header, dict):
        raise FormatError("header: expected a JSON object")
    if header.get("version") != BUNDLE_VERSION:
        raise FormatError(f"version: unsupported bundle version {header.get('version')!r}")
    for key in ("n_signals", "n_samples"):
        val = header.get(key)
        if not isinstance(val, int) or isinstance(val, bool) or val < 1:
            raise FormatError(f"{key}: expected a positive integer, got {val!r}")
    fs = header.get("sample_rate_hz")
    if not isinstance(fs, (int, float)) or isinstance(fs, bool) or not fs > 0:
        raise FormatError(f"sample_rate_hz: expected a positive number, got {fs!r}")
    n_sig, n_samp = header["n_signals"], header["n_samples"]
    labels = header.get("labels", [None] * n_sig)
    if not isinstance(labels, list) or len(labels) != n_sig:
        raise FormatError(f"labels: expected a list of {n_sig} entries")
    payload = np.fromfile(path, dtype="<f8")
    if payload.size != n_sig * n_samp or os.path.getsize(path) != 8 * n_sig * n_samp:
        raise FormatError(
            f"n_signals x n_samples: header declares {n_sig}x{n_samp}={n_sig * n_samp} values, "
            f"payload holds {os.path.getsize(path) / 8:g}")
    mat = payload.reshape(n_sig, n_samp).astype(np.float64)
    bad = ~np.isfinite(mat)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise FormatError(f"samples: non-finite value at signal {r}, sample {c}")
    return SignalSet.from_matrix(mat, float(fs), labels, str(header.get("source_id", "")))


def load_csv(path, sample_rate_hz: float = 1.0, label: str | None = None) -> SignalSet:
    """Import one signal per CSV row (numeric cells only)."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            cells = [c.strip() for c in row if c.strip() != ""]
            if not cells:
                continue
            try:
                vals = [float(c) for c in cells]
            except ValueError as exc:
                raise FormatError(f"row {lineno}: {exc}") from exc
            if not all(np.isfinite(vals)):
                raise FormatError(f"row {lineno}: non-finite value")
            rows.append(vals)
    if not rows:
        raise FormatError("csv: no data rows")
    width = len(rows[0])
    for i, r in enumerate(rows, start=1):
        if len(r) != width:
            raise FormatError(f"row {i}: {len(r)} columns, expected {width}")
    return SignalSet.from_matrix(np.array(rows), sample_rate_hz, [label] * len(rows), str(path))
