"""Rapp solid-state amplifier, input back-off and AWGN."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSignalError, ParameterError
from .signal_core import SignalSet


@dataclass(frozen=True)
class RappParams:
    a_sat: float = 1.0
    gain_a: float = 1.0
    p: float = 2.0

    def __post_init__(self):
        if not self.a_sat > 0:
            raise ParameterError(f"a_sat must be positive, got {self.a_sat}")
        if not self.gain_a > 0:
            raise ParameterError(f"gain_a must be positive, got {self.gain_a}")
        if not self.p > 0:
            raise ParameterError(f"p must be strictly positive, got {self.p}")


def rapp_amplify(signal, params: RappParams) -> np.ndarray:
    """AM/AM conversion applied to |x| with the sign reattached; no AM/PM."""
    x = np.asarray(signal, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ParameterError("rapp_amplify needs finite input")
    lin = params.gain_a * x
    two_p = 2.0 * params.p
    r = np.abs(lin) / params.a_sat
    # r/(1+r^2p)^(1/2p) rewritten to stay finite when r^2p overflows
    with np.errstate(over="ignore", divide="ignore"):
        big = r > 1.0
        inv = np.where(big, 1.0 / np.where(big, r, 1.0), 0.0)
        out_big = params.a_sat / (1.0 + inv ** two_p) ** (1.0 / two_p)
        out_small = np.abs(lin) / (1.0 + r ** two_p) ** (1.0 / two_p)
    return np.sign(x) * np.where(big, out_big, out_small)


def apply_ibo(signal, ibo_db: float) -> np.ndarray:
    """Scale amplitudes down by ``ibo_db`` of input back-off."""
    if ibo_db < 0:
        raise ParameterError(f"ibo_db must be non-negative, got {ibo_db}")
    return np.asarray(signal, dtype=np.float64) * 10.0 ** (-ibo_db / 20.0)


def add_awgn(signal, snr_db: float, seed: int | np.random.Generator) -> np.ndarray:
    """Add white Gaussian noise at ``snr_db`` relative to each signal's mean power.

    A 2-D input is treated as one signal per row.
    """
    x = np.asarray(signal, dtype=np.float64)
    p = np.mean(x * x, axis=-1, keepdims=True)
    if np.any(p == 0):
        raise DegenerateSignalError("cannot set an SNR for an all-zero signal")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    noise_std = np.sqrt(p / 10.0 ** (snr_db / 10.0))
    return x + noise_std * rng.standard_normal(x.shape)


def saturation_from_set(sset) -> float:
    """Mean over signals of per-signal average power, used verbatim as A_sat."""
    mat = sset.matrix if isinstance(sset, SignalSet) else np.atleast_2d(np.asarray(sset, dtype=np.float64))
    if mat.size == 0:
        raise DegenerateSignalError("saturation_from_set needs a non-empty set")
    return float(np.mean(np.mean(mat * mat, axis=1)))
