"""Noise-free Wiener systems at periodic steady state.

A Wiener model is a linear block (FIR coefficients or a first-order
lowpass) followed by a memoryless nonlinearity.  ``SYSTEMS`` holds the
four benchmark systems.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .ingest import WaveformRecord, hold_upsample


class Nonlinearity(str, enum.Enum):
    IDENTITY = "identity"
    CUBIC = "cubic"
    CUBIC_PLUS_SQUARE = "cubic+square"
    SQUARE = "square"
    HARD_CLIP = "hardclip"


@dataclass(frozen=True)
class StaticNL:
    kind: Nonlinearity = Nonlinearity.IDENTITY
    threshold: float = 0.6

    def __post_init__(self):
        object.__setattr__(self, "kind", Nonlinearity(self.kind))
        if self.kind is Nonlinearity.HARD_CLIP and not self.threshold > 0:
            raise ValueError("clip threshold must be > 0")

    def __call__(self, x):
        return apply_nonlinearity(self, x)


def apply_nonlinearity(nl: StaticNL | Nonlinearity | str, x) -> np.ndarray:
    if not isinstance(nl, StaticNL):
        nl = StaticNL(Nonlinearity(nl))
    x = np.asarray(x, dtype=float)
    if nl.kind is Nonlinearity.IDENTITY:
        return x.copy()
    if nl.kind is Nonlinearity.CUBIC:
        return x**3
    if nl.kind is Nonlinearity.CUBIC_PLUS_SQUARE:
        return x**3 + x**2
    if nl.kind is Nonlinearity.SQUARE:
        return x**2
    return np.clip(x, -nl.threshold, nl.threshold)


@dataclass(frozen=True)
class IirLowpass:
    """First-order lowpass ``1 / (1 + s/wc)`` discretized by the bilinear
    transform, pre-warped so the -3 dB point falls exactly on `cutoff_hz`."""

    cutoff_hz: float
    sample_rate_hz: float

    def __post_init__(self):
        if not 0 < self.cutoff_hz < self.sample_rate_hz / 2:
            raise ValueError(f"cutoff {self.cutoff_hz} Hz outside (0, fs/2) for fs={self.sample_rate_hz}")

    @property
    def coefficients(self) -> tuple[np.ndarray, np.ndarray]:
        w = math.tan(math.pi * self.cutoff_hz / self.sample_rate_hz)
        b = np.array([w, w]) / (1.0 + w)
        a = np.array([1.0, (w - 1.0) / (1.0 + w)])
        return b, a

    @property
    def pole(self) -> float:
        return -self.coefficients[1][1]

    def frf(self, freq_hz) -> np.ndarray:
        b, a = self.coefficients
        z1 = np.exp(-2j * np.pi * np.asarray(freq_hz, dtype=float) / self.sample_rate_hz)
        return (b[0] + b[1] * z1) / (a[0] + a[1] * z1)

    def settle_periods(self, n: int) -> int:
        """Periods needed before the recorded one is within 1e-9 of steady state."""
        tau = self.sample_rate_hz / (2 * math.pi * self.cutoff_hz)
        return max(3, math.ceil(10 * tau / n) + 1)


@dataclass(frozen=True)
class WienerModel:
    """Linear block (`fir` coefficients or an `iir` lowpass) + static nonlinearity."""

    fir: tuple[float, ...] | None = None
    iir: IirLowpass | None = None
    nl: StaticNL = field(default_factory=StaticNL)
    name: str = ""

    def __post_init__(self):
        if (self.fir is None) == (self.iir is None):
            raise ValueError("exactly one of fir / iir must be given")
        if self.fir is not None:
            g = tuple(float(c) for c in self.fir)
            if len(g) < 1:
                raise ValueError("FIR needs at least one coefficient")
            object.__setattr__(self, "fir", g)
        if not isinstance(self.nl, StaticNL):
            object.__setattr__(self, "nl", StaticNL(self.nl))

    @property
    def g(self) -> np.ndarray:
        if self.fir is None:
            raise AttributeError("IIR model has no FIR coefficients")
        return np.array(self.fir)

    def linear(self, u, settle_periods: int | None = None) -> np.ndarray:
        u = np.asarray(getattr(u, "samples", u), dtype=float)
        if self.fir is not None:
            return fir_steady_state(self.fir, u)
        return iir_lowpass_steady_state(self.iir.cutoff_hz, self.iir.sample_rate_hz, u, settle_periods)

    def __call__(self, u) -> np.ndarray:
        return apply_nonlinearity(self.nl, self.linear(u))


G3 = (1.0, 0.7, 0.3)
G6 = (1.0, 0.7, 0.3, 0.2, 0.1, 0.05)

SYSTEMS: dict[int, WienerModel] = {
    1: WienerModel(fir=G3, nl=StaticNL(Nonlinearity.CUBIC), name="system1"),
    2: WienerModel(fir=G6, nl=StaticNL(Nonlinearity.CUBIC), name="system2"),
    3: WienerModel(fir=G3, nl=StaticNL(Nonlinearity.CUBIC_PLUS_SQUARE), name="system3"),
    4: WienerModel(fir=G6, nl=StaticNL(Nonlinearity.CUBIC_PLUS_SQUARE), name="system4"),
}


def fir_steady_state(g, u) -> np.ndarray:
    """Periodic response ``x[t] = sum_k g[k] u[(t - k) mod N]``.

    Accepts a single period or a row-stacked batch of periods.
    """
    g = np.asarray(g, dtype=float)
    u = np.asarray(getattr(u, "samples", u), dtype=float)
    n = u.shape[-1]
    if g.size > n:
        raise ValueError(f"FIR length {g.size} exceeds period {n}")
    x = np.zeros_like(u)
    for k, c in enumerate(g):
        if c != 0.0:
            x += c * np.roll(u, k, axis=-1)
    return x


def iir_lowpass_steady_state(cutoff_hz: float, fs_hz: float, u, n_settle_periods: int | None = None) -> np.ndarray:
    """Run the lowpass over `n_settle_periods` repetitions of `u` from rest
    and return the following period.

    `u` may be one period or a row-stacked batch.
    """
    filt = IirLowpass(cutoff_hz, fs_hz)
    u = np.asarray(getattr(u, "samples", u), dtype=float)
    n = u.shape[-1]
    settle = filt.settle_periods(n) if n_settle_periods is None else int(n_settle_periods)
    if settle < 0:
        raise ValueError("n_settle_periods must be >= 0")
    b, a = filt.coefficients
    zi = np.zeros(u.shape[:-1] + (1,))
    for _ in range(settle):
        _, zi = lfilter(b, a, u, axis=-1, zi=zi)
    x, _ = lfilter(b, a, u, axis=-1, zi=zi)
    return x


def iir_periodic_fixed_point(cutoff_hz: float, fs_hz: float, u) -> np.ndarray:
    """Exact periodic response of the lowpass, from the fixed point of the
    one-period state map ``z -> pole**N z + z_N``."""
    filt = IirLowpass(cutoff_hz, fs_hz)
    u = np.asarray(u, dtype=float)
    b, a = filt.coefficients
    _, z_n = lfilter(b, a, u, zi=np.zeros(1))
    z_star = z_n / (1.0 - filt.pole ** u.size)
    x, _ = lfilter(b, a, u, zi=z_star)
    return x


def simulate(model: WienerModel, u, oversample_factor: int = 1, n_periods: int = 1,
             settle_periods: int | None = None) -> WaveformRecord:
    """Steady-state input/output record of `model` driven by periodic `u`.

    `u` is zero-order held by `oversample_factor` first; the record holds
    `n_periods` identical periods at the simulation rate with the
    transient already removed.  For IIR models the simulation rate is the
    filter's sample rate.
    """
    samples = np.asarray(getattr(u, "samples", u), dtype=float)
    held = hold_upsample(samples, oversample_factor)
    y = apply_nonlinearity(model.nl, model.linear(held, settle_periods))
    fs = model.iir.sample_rate_hz if model.iir is not None else float(oversample_factor)
    return WaveformRecord(
        input=np.tile(held, n_periods),
        output=np.tile(y, n_periods),
        sample_rate_hz=fs,
        period_len=held.size,
        n_periods=n_periods,
        discard_periods=0,
        meta={"oversample": oversample_factor},
    )


def simulate_capture(model: WienerModel, u, oversample_factor: int, n_periods: int,
                     discard_periods: int) -> WaveformRecord:
    """Record as an acquisition board would deliver it: the system starts at
    rest and the first `discard_periods` periods contain the transient."""
    samples = np.asarray(getattr(u, "samples", u), dtype=float)
    held = hold_upsample(samples, oversample_factor)
    total = n_periods + discard_periods
    drive = np.tile(held, total)
    if model.fir is not None:
        x = lfilter(model.g, [1.0], drive)
    else:
        b, a = model.iir.coefficients
        x = lfilter(b, a, drive)
    fs = model.iir.sample_rate_hz if model.iir is not None else float(oversample_factor)
    return WaveformRecord(drive, apply_nonlinearity(model.nl, x), fs, held.size, n_periods,
                          discard_periods, meta={"oversample": oversample_factor})
