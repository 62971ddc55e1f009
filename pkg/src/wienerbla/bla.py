"""Best linear approximation from groups of periodic realizations.

Within a group the cross- and auto-power spectra are summed over all
records before dividing, ``G = sum S_YU / sum S_UU``.  Groups are then
combined by their mean, with the spread of ``|G|`` across groups
reported in dB.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import dsp
from .ingest import WaveformRecord, _atomic_write, segment

CSV_COLUMNS = ("freq", "mag_bla_db", "std_db", "mag_ref_db", "ratio_db", "phase_diff_deg")
SUU_REL_FLOOR = 1e-12


@dataclass(frozen=True)
class BlaEstimate:
    """BLA on the usable excited bins.

    `bins` are DFT indices into a period of length `n`; `freq` is in Hz
    when the records carried a physical sample rate, otherwise in cycles
    per generator sample.  `g_std_db` is ``20 log10`` of the sample
    standard deviation of ``|G|`` across groups (NaN with a single group).
    """

    freq: np.ndarray
    bins: np.ndarray
    g_mean: np.ndarray
    g_std_db: np.ndarray
    groups: int
    n: int
    excited_bins: np.ndarray
    group_g: np.ndarray | None = None
    scale: float = 1.0


def _spectra(record: WaveformRecord) -> tuple[np.ndarray, np.ndarray]:
    u, y = segment(record)
    return dsp.cross_power(y, u), dsp.auto_power(u)


def _default_mask(n: int) -> np.ndarray:
    return np.arange(n) != 0


def _usable_mask(n: int, mask) -> np.ndarray:
    mask = _default_mask(n) if mask is None else np.asarray(mask, dtype=bool)
    if mask.size != n:
        raise ValueError(f"excited-bin mask has length {mask.size}, period is {n}")
    k = np.arange(n)
    return mask & (k > 0) & (k <= n // 2)


def estimate_group(records: Sequence[WaveformRecord], excited_bins=None) -> np.ndarray:
    """Group estimate ``sum S_YU / sum S_UU`` over the records.

    Returns a length-``N`` complex array; bins outside the excited set, or
    where the summed auto-power is below ``1e-12`` of its maximum, are NaN
    (the latter also raise a ``RuntimeWarning``).
    """
    if len(records) < 1:
        raise ValueError("a group needs at least one record")
    n = records[0].period_len
    if any(r.period_len != n for r in records):
        raise ValueError("records in a group must share the period length")
    syu = np.zeros(n, dtype=complex)
    suu = np.zeros(n)
    for rec in records:
        a, b = _spectra(rec)
        syu += a
        suu += b
    mask = _usable_mask(n, excited_bins)
    weak = mask & (suu < SUU_REL_FLOOR * suu.max())
    if weak.any():
        warnings.warn(f"excluded {int(weak.sum())} excited bins with vanishing input power: "
                      f"{np.flatnonzero(weak)[:10].tolist()}", RuntimeWarning, stacklevel=2)
    keep = mask & ~weak
    g = np.full(n, np.nan, dtype=complex)
    g[keep] = syu[keep] / suu[keep]
    return g


def _std_db(group_g: np.ndarray) -> np.ndarray:
    if group_g.shape[0] < 2:
        return np.full(group_g.shape[1], np.nan)
    return dsp.mag_db(np.std(np.abs(group_g), axis=0, ddof=1))


def estimate(realizations: Sequence[WaveformRecord], group_size: int = 4, excited_bins=None) -> BlaEstimate:
    """Split `realizations` into consecutive groups of `group_size` and
    average the group estimates.

    Realizations that do not fill a last group are dropped.
    """
    if group_size < 1:
        raise ValueError("group_size must be >= 1")
    if len(realizations) < group_size:
        raise ValueError(f"{len(realizations)} realizations cannot fill one group of {group_size}")
    n = realizations[0].period_len
    if any(r.period_len != n for r in realizations):
        raise ValueError("all realizations must share the period length")
    groups = len(realizations) // group_size
    per_group = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        for gi in range(groups):
            per_group.append(estimate_group(realizations[gi * group_size:(gi + 1) * group_size], excited_bins))
    for w in caught[:1]:
        warnings.warn(str(w.message), RuntimeWarning, stacklevel=2)
    G = np.array(per_group)
    usable = np.all(np.isfinite(G), axis=0)
    bins = np.flatnonzero(usable)
    fs = realizations[0].sample_rate_hz
    Gb = G[:, bins]
    return BlaEstimate(
        freq=bins * fs / n,
        bins=bins,
        g_mean=Gb.mean(axis=0),
        g_std_db=_std_db(Gb),
        groups=groups,
        n=n,
        excited_bins=usable,
        group_g=Gb,
    )


def _on_bins(bla: BlaEstimate, g_ref) -> np.ndarray:
    g_ref = np.asarray(g_ref, dtype=complex)
    if g_ref.size == bla.bins.size:
        return g_ref
    if g_ref.size == bla.n:
        return g_ref[bla.bins]
    raise ValueError(f"reference has {g_ref.size} bins; expected {bla.bins.size} or {bla.n}")


def ls_scale_factor(g_hat, g_ref) -> float:
    """Real ``a`` minimizing ``sum |g_ref - a g_hat|**2``."""
    g_hat = np.asarray(g_hat, dtype=complex)
    energy = float(np.sum(np.abs(g_hat) ** 2))
    if energy == 0:
        raise ValueError("BLA estimate has zero energy; no scale factor exists")
    return float(np.real(np.sum(np.asarray(g_ref) * np.conj(g_hat))) / energy)


def scale_to_reference(bla: BlaEstimate, g_ref) -> tuple[BlaEstimate, float]:
    """Least-squares real scaling of the BLA towards `g_ref`.

    The spread in dB moves by ``20 log10 |a|``.
    """
    ref = _on_bins(bla, g_ref)
    a = ls_scale_factor(bla.g_mean, ref)
    shift = 20 * np.log10(abs(a)) if a != 0 else dsp.DB_FLOOR
    scaled = replace(
        bla,
        g_mean=a * bla.g_mean,
        g_std_db=np.maximum(bla.g_std_db + shift, dsp.DB_FLOOR),
        group_g=None if bla.group_g is None else a * bla.group_g,
        scale=bla.scale * a,
    )
    return scaled, a


def ratio_to_reference(bla: BlaEstimate, g_ref) -> tuple[np.ndarray, np.ndarray]:
    """``20 log10 |G_ref / G|`` and the phase of ``G_ref / G`` in degrees, (-180, 180].

    Bins where the estimate vanishes are NaN and trigger a warning.
    """
    ref = _on_bins(bla, g_ref)
    g = bla.g_mean
    zero = g == 0
    if zero.any():
        warnings.warn(f"{int(zero.sum())} bins with zero BLA excluded from the ratio",
                      RuntimeWarning, stacklevel=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(zero, np.nan, ref / np.where(zero, 1.0, g))
    mag = np.where(zero, np.nan, dsp.mag_db(r))
    phase = np.where(zero, np.nan, dsp.wrap_deg(np.rad2deg(np.angle(r))))
    return mag, phase


def frf_fir(g, n: int) -> np.ndarray:
    """DFT of the impulse response zero-padded to `n` points."""
    g = np.asarray(g, dtype=float)
    if g.size > n:
        raise ValueError(f"FIR length {g.size} exceeds {n}")
    return np.fft.fft(g, n)


def mean_abs_deviation(bla: BlaEstimate, g_ref) -> tuple[float, float]:
    """Mean ``|ratio dB|`` and mean ``|phase difference|`` over the bins."""
    mag, ph = ratio_to_reference(bla, g_ref)
    return float(np.nanmean(np.abs(mag))), float(np.nanmean(np.abs(ph)))


def to_csv(bla: BlaEstimate, g_ref=None) -> str:
    """Estimator CSV (columns :data:`CSV_COLUMNS`); reference columns are
    ``nan`` without a reference."""
    mag = dsp.mag_db(bla.g_mean)
    if g_ref is not None:
        ref = _on_bins(bla, g_ref)
        mag_ref = dsp.mag_db(ref)
        ratio, phase = ratio_to_reference(bla, ref)
    else:
        mag_ref = ratio = phase = np.full(bla.bins.size, np.nan)
    lines = [",".join(CSV_COLUMNS)]
    for row in zip(bla.freq.tolist(), mag.tolist(), bla.g_std_db.tolist(), mag_ref.tolist(),
                   ratio.tolist(), phase.tolist()):
        lines.append(",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def write_csv(path, bla: BlaEstimate, g_ref=None) -> None:
    _atomic_write(path, to_csv(bla, g_ref))
