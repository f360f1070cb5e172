"""Analytic mu-law companding, power scaling and clipping-noise estimators."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DegenerateSignalError, ParameterError, RangeError

ASYMPTOTIC_FLOOR_DB = 3.0


@dataclass(frozen=True)
class MuLawParams:
    mu: float = 255.0
    norm_a: float = 1.0

    def __post_init__(self):
        if not self.mu > 0:
            raise ParameterError(f"mu must be positive, got {self.mu}")
        if not self.norm_a > 0:
            raise ParameterError(f"norm_a must be positive, got {self.norm_a}")

    @classmethod
    def fitted(cls, signal, mu: float = 255.0) -> "MuLawParams":
        """Parameters with ``norm_a`` set to the signal's peak magnitude."""
        peak = float(np.max(np.abs(np.asarray(signal, dtype=np.float64))))
        if peak == 0:
            raise DegenerateSignalError("cannot fit mu-law normalization to an all-zero signal")
        return cls(mu, peak)


def _check_range(x: np.ndarray, a: float) -> None:
    peak = float(np.max(np.abs(x))) if x.size else 0.0
    # a few ulps of slack so a per-signal A = max|x| always passes
    if peak > a * (1 + 4 * np.finfo(float).eps):
        raise RangeError(f"|x| reaches {peak:.6g}, beyond the normalization constant A={a:.6g}")


def mu_compress(signal, params: MuLawParams) -> np.ndarray:
    """``A sgn(x) ln(1 + mu|x/A|) / ln(1 + mu)``."""
    x = np.asarray(signal, dtype=np.float64)
    _check_range(x, params.norm_a)
    a = params.norm_a
    return a * np.sign(x) * np.log1p(params.mu * np.abs(x / a)) / np.log1p(params.mu)


def mu_expand(signal, params: MuLawParams) -> np.ndarray:
    """Inverse of :func:`mu_compress`."""
    y = np.asarray(signal, dtype=np.float64)
    _check_range(y, params.norm_a)
    a = params.norm_a
    return a * np.sign(y) * np.expm1(np.abs(y / a) * np.log1p(params.mu)) / params.mu


def mu_compress_set(matrix, mu: float = 255.0) -> tuple[np.ndarray, np.ndarray]:
    """Compress each row with its own ``A = max|row|``; returns (compressed, A per row)."""
    m = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    a = np.max(np.abs(m), axis=1)
    if np.any(a == 0):
        raise DegenerateSignalError(f"row {int(np.argmin(a))} is all zeros")
    out = a[:, None] * np.sign(m) * np.log1p(mu * np.abs(m / a[:, None])) / np.log1p(mu)
    return out, a


def mu_expand_set(matrix, norm_a, mu: float = 255.0) -> np.ndarray:
    """Row-wise expansion with per-row constants; inputs beyond A saturate at A."""
    y = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    a = np.asarray(norm_a, dtype=np.float64).reshape(-1, 1)
    r = np.minimum(np.abs(y / a), 1.0)
    return a * np.sign(y) * np.expm1(r * np.log1p(mu)) / mu


def mean_power(x, axis=-1):
    x = np.asarray(x, dtype=np.float64)
    return np.mean(x * x, axis=axis)


def power_scale(signal, target_mean_power: float) -> np.ndarray:
    """Uniformly rescale so the mean power equals ``target_mean_power``."""
    x = np.asarray(signal, dtype=np.float64)
    if not target_mean_power > 0:
        raise ParameterError(f"target_mean_power must be positive, got {target_mean_power}")
    current = float(mean_power(x.reshape(-1)))
    if current == 0:
        raise DegenerateSignalError("cannot power-scale an all-zero signal")
    return x * math.sqrt(target_mean_power / current)


def compression_loss(target_signal, af: Callable[[np.ndarray], np.ndarray], metric: str = "mse") -> float:
    """Error between a target and its compressed, power-preserved form."""
    x = np.asarray(target_signal, dtype=np.float64)
    p = float(mean_power(x.reshape(-1)))
    if p == 0:
        raise DegenerateSignalError("compression loss is undefined for an all-zero target")
    xpc = power_scale(af(x), p)
    d = x - xpc
    if metric == "mse":
        return float(np.mean(d * d))
    if metric == "mae":
        return float(np.mean(np.abs(d)))
    raise ParameterError(f"metric must be 'mse' or 'mae', got {metric!r}")


def peak_c(papr_t_db: float, p_in: float) -> float:
    """Peak amplitude allowed by a target PAPR at average power ``p_in``."""
    if not p_in > 0:
        raise ParameterError(f"p_in must be positive, got {p_in}")
    return math.sqrt(10.0 ** (papr_t_db / 10.0) * p_in)


def clipping_noise_approx(papr_t_db: float, sigma2: float) -> float:
    """Asymptotic clipping-noise power for a Gaussian signal limited at a target PAPR."""
    if papr_t_db < ASYMPTOTIC_FLOOR_DB:
        raise RangeError(f"papr_t_db={papr_t_db} is below the {ASYMPTOTIC_FLOOR_DB} dB validity floor")
    if sigma2 < 0:
        raise ParameterError(f"sigma2 must be non-negative, got {sigma2}")
    if papr_t_db < 6.0:
        warnings.warn("asymptotic clipping-noise estimate is loose below 6 dB", RuntimeWarning, stacklevel=2)
    ratio = 10.0 ** (papr_t_db / 10.0)
    return 2.0 * math.sqrt(2.0 / math.pi) * sigma2 * ratio ** -1.5 * math.exp(-ratio / 2.0)


@dataclass(frozen=True)
class MonteCarloEstimate:
    value: float
    std_error: float
    n_mc: int


def clipping_noise_oracle(papr_t_db: float, sigma2: float, n_mc: int = 10**6, seed: int = 0,
                          chunk: int = 2**20) -> MonteCarloEstimate:
    """Monte-Carlo value of ``2 E[(x - c)^2 1{x > c}]`` for ``x ~ N(0, sigma2)``."""
    if n_mc < 10**5:
        raise ParameterError(f"n_mc must be at least 1e5, got {n_mc}")
    if not sigma2 > 0:
        raise ParameterError(f"sigma2 must be positive, got {sigma2}")
    c = peak_c(papr_t_db, sigma2)
    sigma = math.sqrt(sigma2)
    rng = np.random.default_rng(seed)
    s1 = s2 = 0.0
    left = int(n_mc)
    while left:
        m = min(chunk, left)
        x = sigma * rng.standard_normal(m)
        e = np.where(x > c, 2.0 * (x - c) ** 2, 0.0)
        s1 += float(e.sum())
        s2 += float((e * e).sum())
        left -= m
    mean = s1 / n_mc
    var = max(s2 / n_mc - mean * mean, 0.0)
    return MonteCarloEstimate(mean, math.sqrt(var / n_mc), int(n_mc))


def clipping_noise_quadrature(papr_t_db: float, sigma2: float, n_points: int = 200_001,
                              span_sigmas: float = 10.0) -> float:
    """Trapezoid rule for the clipping-noise integral over [c, c + span*sigma]."""
    c = peak_c(papr_t_db, sigma2)
    sigma = math.sqrt(sigma2)
    x = np.linspace(c, c + span_sigmas * sigma, n_points)
    pdf = np.exp(-x * x / (2.0 * sigma2)) / math.sqrt(2.0 * math.pi * sigma2)
    return 2.0 * float(np.trapezoid((x - c) ** 2 * pdf, x))
