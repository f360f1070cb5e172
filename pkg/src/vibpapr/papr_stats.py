"""PAPR / crest factor and exact, closed-form and empirical CCDFs."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateSignalError, ParameterError, RangeError
from .signal_core import SignalSet

CLOSED_FORM_FLOOR_DB = 3.0

_erfc = np.frompyfunc(math.erfc, 1, 1)


def papr(signal) -> float:
    """Peak instantaneous power over mean power of a finite record (>= 1)."""
    x = np.asarray(signal, dtype=np.float64).reshape(-1)
    if x.size == 0:
        raise ParameterError("papr of an empty signal")
    p = x * x
    mean = float(np.mean(p))
    if mean == 0:
        raise DegenerateSignalError("papr is undefined for an all-zero signal")
    return float(np.max(p)) / mean


def papr_rows(matrix) -> np.ndarray:
    """Linear PAPR of every row of a (signals, samples) array."""
    m = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    p = m * m
    mean = p.mean(axis=1)
    if np.any(mean == 0):
        raise DegenerateSignalError(f"row {int(np.argmin(mean))} is all zeros")
    return p.max(axis=1) / mean


def papr_db(ratio) -> float | np.ndarray:
    r = np.asarray(ratio, dtype=np.float64)
    if np.any(r <= 0):
        raise ParameterError("papr_db needs a positive ratio")
    out = 10.0 * np.log10(r)
    return float(out) if out.ndim == 0 else out


def crest_factor(signal) -> float:
    return math.sqrt(papr(signal))


def _linear(p_o_db) -> np.ndarray:
    return 10.0 ** (np.asarray(p_o_db, dtype=np.float64) / 10.0)


def _check_n(n_samples: int) -> None:
    if int(n_samples) != n_samples or n_samples < 1:
        raise ParameterError(f"n_samples must be a positive integer, got {n_samples}")


def ccdf_exact(p_o_db, n_samples: int):
    """``1 - erf(sqrt(P_o/2))**N`` for a Gaussian record of N samples.

    Evaluated as ``-expm1(N log1p(-erfc(.)))`` so tail probabilities keep
    full relative precision.
    """
    _check_n(n_samples)
    p = _linear(p_o_db)
    tail = np.asarray(_erfc(np.sqrt(p / 2.0)), dtype=np.float64)
    out = -np.expm1(n_samples * np.log1p(-tail))
    return float(out) if out.ndim == 0 else out


def ccdf_closed_form(p_o_db, n_samples: int):
    """Asymptotic CCDF using ``erfc(z) ~ exp(-z^2)/(z sqrt(pi))``; clamped to [0, 1]."""
    _check_n(n_samples)
    db = np.asarray(p_o_db, dtype=np.float64)
    if np.any(db < CLOSED_FORM_FLOOR_DB):
        raise RangeError(f"closed-form CCDF needs P_o >= {CLOSED_FORM_FLOOR_DB} dB, got {db.min():g}")
    p = _linear(db)
    tail = np.exp(-p / 2.0) / np.sqrt(p * np.pi / 2.0)
    out = np.clip(-np.expm1(n_samples * np.log1p(-np.minimum(tail, 1.0))), 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class CcdfCurve:
    thresholds_db: np.ndarray
    probabilities: np.ndarray
    kind: str
    n_samples: int

    def __post_init__(self):
        if self.kind not in ("exact", "closed_form", "empirical"):
            raise ParameterError(f"unknown CCDF kind {self.kind!r}")
        t = np.asarray(self.thresholds_db, dtype=np.float64)
        p = np.asarray(self.probabilities, dtype=np.float64)
        if t.shape != p.shape or t.ndim != 1:
            raise ParameterError("thresholds and probabilities must be 1-D and aligned")
        if np.any(np.diff(t) < 0):
            raise ParameterError("thresholds must be ascending")
        object.__setattr__(self, "thresholds_db", t)
        object.__setattr__(self, "probabilities", p)

    def at(self, threshold_db: float) -> float:
        i = int(np.argmin(np.abs(self.thresholds_db - threshold_db)))
        return float(self.probabilities[i])

    def rows(self):
        for t, p in zip(self.thresholds_db, self.probabilities):
            yield (float(t), float(p), self.kind, self.n_samples)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["threshold_db", "probability", "kind", "N"])
            for t, p, k, n in self.rows():
                w.writerow([repr(t), repr(p), k, n])


def threshold_grid(from_db: float, to_db: float, step: float) -> np.ndarray:
    """Inclusive grid rounded to 10 decimals so 0.1 dB steps land on exact labels."""
    if step <= 0 or to_db < from_db:
        raise ParameterError("need step > 0 and to_db >= from_db")
    n = int(math.floor((to_db - from_db) / step + 1e-9)) + 1
    return np.round(from_db + step * np.arange(n), 10)


def exact_curve(thresholds_db, n_samples: int) -> CcdfCurve:
    t = np.asarray(thresholds_db, dtype=np.float64)
    return CcdfCurve(t, np.atleast_1d(ccdf_exact(t, n_samples)), "exact", int(n_samples))


def closed_form_curve(thresholds_db, n_samples: int) -> CcdfCurve:
    t = np.asarray(thresholds_db, dtype=np.float64)
    return CcdfCurve(t, np.atleast_1d(ccdf_closed_form(t, n_samples)), "closed_form", int(n_samples))


def ccdf_from_papr_db(values_db, thresholds_db: Sequence[float], n_samples: int) -> CcdfCurve:
    t = np.asarray(thresholds_db, dtype=np.float64).reshape(-1)
    if np.any(np.diff(t) < 0):
        raise ParameterError("thresholds must be ascending")
    v = np.sort(np.asarray(values_db, dtype=np.float64).reshape(-1))
    if v.size == 0:
        raise ParameterError("no PAPR values")
    # count of values strictly above each threshold
    above = v.size - np.searchsorted(v, t, side="right")
    return CcdfCurve(t, above / v.size, "empirical", int(n_samples))


def ccdf_empirical(sset, thresholds_db: Sequence[float]) -> CcdfCurve:
    """Fraction of signals whose PAPR (dB) strictly exceeds each threshold."""
    mat = sset.matrix if isinstance(sset, SignalSet) else np.atleast_2d(np.asarray(sset, dtype=np.float64))
    if mat.shape[0] < 1:
        raise ParameterError("ccdf_empirical needs at least one signal")
    return ccdf_from_papr_db(papr_db(papr_rows(mat)), thresholds_db, mat.shape[1])
