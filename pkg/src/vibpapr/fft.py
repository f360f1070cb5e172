"""Iterative radix-2 FFT over the last axis."""
from __future__ import annotations

import numpy as np

from .errors import ParameterError


def next_pow2(n: int) -> int:
    return 1 << max(int(n) - 1, 0).bit_length()


def _bit_reverse(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def fft(x, n: int | None = None) -> np.ndarray:
    """Decimation-in-time FFT; input is zero-padded or truncated to ``n`` (a power of two)."""
    x = np.asarray(x)
    if n is None:
        n = x.shape[-1]
    if n < 1 or n & (n - 1):
        raise ParameterError(f"FFT length must be a power of two, got {n}")
    m = x.shape[-1]
    buf = np.zeros(x.shape[:-1] + (n,), dtype=np.complex128)
    buf[..., :min(m, n)] = x[..., :n]
    a = buf[..., _bit_reverse(n)]
    lead = a.shape[:-1]
    half = 1
    while half < n:
        tw = np.exp(-2j * np.pi * np.arange(half) / (2 * half))
        blocks = a.reshape(lead + (n // (2 * half), 2, half))
        even = blocks[..., 0, :]
        odd = blocks[..., 1, :] * tw
        a = np.stack((even + odd, even - odd), axis=-2).reshape(lead + (n,))
        half *= 2
    return a


def rfft(x, n: int | None = None) -> np.ndarray:
    """Non-negative-frequency half of :func:`fft` for real input."""
    if n is None:
        n = np.shape(x)[-1]
    return fft(np.asarray(x, dtype=np.float64), n)[..., : n // 2 + 1]
