"""Spectral primitives for periodic records.

All transforms are un-normalized in the forward direction,
``X[k] = sum_t x[t] exp(-2j pi k t / N)``, which is what ``numpy.fft``
computes for any length (composite lengths such as 762 = 2*3*127 are
handled by its mixed-radix kernels).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DB_FLOOR = -350.0


@dataclass(frozen=True)
class Spectrum:
    """DFT bins of one real period plus the rate they were sampled at."""

    bins: np.ndarray
    n: int
    sample_rate: float = 1.0

    @property
    def freq(self) -> np.ndarray:
        return np.arange(self.n) * self.sample_rate / self.n


def dft(x, sample_rate: float = 1.0) -> Spectrum:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 1:
        raise ValueError("dft expects a non-empty 1-D array")
    return Spectrum(np.fft.fft(x), x.size, float(sample_rate))


def idft(spec: Spectrum) -> np.ndarray:
    """Inverse of :func:`dft`, returning the real part of the reconstruction."""
    return np.fft.ifft(spec.bins).real


def _periods(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError("expected a (periods, N) matrix")
    return a


def auto_power(u) -> np.ndarray:
    """Average of ``|U_p[k]|**2`` over the rows (periods) of `u`."""
    U = np.fft.fft(_periods(u), axis=1)
    return np.mean(np.abs(U) ** 2, axis=0)


def cross_power(y, u) -> np.ndarray:
    """Average of ``Y_p[k] * conj(U_p[k])`` over the rows of `y` and `u`."""
    y = _periods(y)
    u = _periods(u)
    if y.shape != u.shape:
        raise ValueError(f"shape mismatch: y {y.shape} vs u {u.shape}")
    Y = np.fft.fft(y, axis=1)
    U = np.fft.fft(u, axis=1)
    return np.mean(Y * np.conj(U), axis=0)


def circular_xcorr(y, u) -> np.ndarray:
    """``R[r] = (1/N) sum_t y[t] u[(t - r) mod N]`` for each row pair.

    Works on 1-D arrays or row-stacked batches.
    """
    y = np.asarray(y, dtype=float)
    u = np.asarray(u, dtype=float)
    if y.shape != u.shape:
        raise ValueError(f"shape mismatch: y {y.shape} vs u {u.shape}")
    n = y.shape[-1]
    Y = np.fft.fft(y, axis=-1)
    U = np.fft.fft(u, axis=-1)
    return np.fft.ifft(Y * np.conj(U), axis=-1).real / n


def mag_db(x) -> np.ndarray:
    """``20 log10 |x|`` clamped below at :data:`DB_FLOOR`."""
    a = np.abs(np.asarray(x))
    with np.errstate(divide="ignore"):
        out = 20.0 * np.log10(a)
    return np.maximum(out, DB_FLOOR)


def wrap_deg(phase_deg) -> np.ndarray:
    """Map degrees onto the principal interval (-180, 180]."""
    p = np.mod(np.asarray(phase_deg, dtype=float) + 180.0, 360.0) - 180.0
    return np.where(p == -180.0, 180.0, p)
