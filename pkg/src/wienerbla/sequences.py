"""Periodic excitation sequences for BLA measurements.

Five classes are provided: maximum-length binary sequences (MLBS), their
inverse-repeat variant (IRMLBS), direct-synthesis ternary sequences (DS),
randomized constrained ternary sequences (RCS) and white Gaussian noise
(WGN).  Every generator returns one period at unit amplitude; use
:func:`normalize` to set the power.

Ternary sequences suppress every harmonic divisible by 2 or 3.  For a
period ``N = 6P`` this is equivalent to two linear constraints,

* ``u[k + N/2] = -u[k]`` (no even bins), and
* ``u[k] + u[k + N/3] + u[k + 2N/3] = 0`` (no bins divisible by 3).

Restricted to one residue class ``i mod P`` the six samples
``u[i], u[i + P], ..., u[i + 5P]`` must then be zero or a cyclic shift of
``(1, 1, 0, -1, -1, 0)``.  RCS draws those shifts at random per residue
and then refines them towards an ideal off-grid autocorrelation.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .ingest import _atomic_write

# Period-6 pattern whose DFT is supported on bins 1 and 5 only.
TERNARY_PATTERN = np.array([1.0, 1.0, 0.0, -1.0, -1.0, 0.0])

EXCITED_EPS = 1e-9

# One primitive tap set per order, Fibonacci convention (see Lfsr).
DEFAULT_TAPS: dict[int, tuple[int, ...]] = {
    2: (2, 1),
    3: (3, 2),
    4: (4, 3),
    5: (5, 3),
    6: (6, 5),
    7: (7, 6),
    8: (8, 6, 5, 4),
    9: (9, 5),
    10: (10, 7),
    11: (11, 9),
    12: (12, 6, 4, 1),
    13: (13, 4, 3, 1),
    14: (14, 5, 3, 1),
    15: (15, 14),
    16: (16, 15, 13, 4),
    17: (17, 14),
    18: (18, 11),
    19: (19, 6, 2, 1),
    20: (20, 17),
    21: (21, 19),
    22: (22, 21),
    23: (23, 18),
    24: (24, 23, 22, 17),
}

MIN_ORDER, MAX_ORDER = 2, 24


class SignalClass(str, enum.Enum):
    MLBS = "mlbs"
    IRMLBS = "irmlbs"
    DS = "ds"
    RCS = "rcs"
    WGN = "wgn"

    @property
    def is_ternary(self) -> bool:
        return self in (SignalClass.DS, SignalClass.RCS)

    @property
    def is_binary(self) -> bool:
        return self in (SignalClass.MLBS, SignalClass.IRMLBS)


@dataclass(frozen=True)
class ExcitationSignal:
    """One period of a periodic excitation.

    Attributes
    ----------
    samples : ndarray
        The period, length ``N``; read-only.
    kind : SignalClass
        Generator class, decides the excited-bin rule.
    levels : tuple of float
        Declared amplitude set; empty for Gaussian noise.
    excited_bins : ndarray of bool
        Length-``N`` mask of DFT bins carrying excitation power.
    meta : dict
        Provenance (amplitude, seed, taps, ...), exported to the JSON sidecar.
    """

    samples: np.ndarray
    kind: SignalClass
    levels: tuple[float, ...]
    excited_bins: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples.flags.writeable = False
        self.excited_bins.flags.writeable = False

    @property
    def n(self) -> int:
        return self.samples.size

    @property
    def rms(self) -> float:
        return float(np.sqrt(np.mean(self.samples**2)))

    @property
    def amplitude(self) -> float:
        return float(self.meta.get("amplitude", np.max(np.abs(self.samples))))


def _make(samples: np.ndarray, kind: SignalClass, amplitude: float, **meta) -> ExcitationSignal:
    samples = np.array(samples, dtype=float)
    if kind.is_ternary:
        levels: tuple[float, ...] = (amplitude, 0.0, -amplitude)
    elif kind.is_binary:
        levels = (amplitude, -amplitude)
    else:
        levels = ()
    mask = _class_rule(kind, samples.size)
    sig = ExcitationSignal(samples, kind, levels, mask, {"class": kind.value, "n": samples.size,
                                                         "amplitude": amplitude, **meta})
    _verify_excited(sig)
    return sig


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


# --------------------------------------------------------------------------
# LFSR / maximum-length sequences
# --------------------------------------------------------------------------


class LfsrPeriodError(ValueError):
    """Raised when a tap set does not produce a maximum-length sequence."""

    def __init__(self, order: int, taps, period: int):
        self.order = order
        self.taps = tuple(taps)
        self.period = period
        super().__init__(
            f"taps {self.taps} of order {order} are not primitive: "
            f"achieved period {period}, expected {2**order - 1}"
        )


@dataclass
class Lfsr:
    """Fibonacci linear-feedback shift register.

    Register cells are numbered 1..order.  Each clock outputs cell
    `order`, shifts every cell up by one, and loads cell 1 with the XOR of
    the cells listed in `taps`.  With ``taps = {3, 2}`` and the all-ones
    state the output is ``1110010``.
    """

    order: int
    taps: tuple[int, ...]
    state: int = -1

    def __post_init__(self):
        if not MIN_ORDER <= self.order <= MAX_ORDER:
            raise ValueError(f"order must be in [{MIN_ORDER}, {MAX_ORDER}], got {self.order}")
        taps = tuple(sorted({int(t) for t in self.taps}, reverse=True))
        if not taps or taps[0] != self.order or taps[-1] < 1:
            raise ValueError(f"taps must lie in [1, {self.order}] and include {self.order}: {self.taps}")
        self.taps = taps
        full = (1 << self.order) - 1
        if self.state == -1:
            self.state = full
        if not 0 < self.state <= full:
            raise ValueError("LFSR state must be a nonzero order-bit integer")
        self._mask = full
        self._tapmask = sum(1 << (t - 1) for t in taps)

    def step(self) -> int:
        s = self.state
        out = (s >> (self.order - 1)) & 1
        fb = (s & self._tapmask).bit_count() & 1
        self.state = ((s << 1) | fb) & self._mask
        return out

    def run(self) -> np.ndarray:
        """Clock one full period, checking that the state cycle has length ``2**order - 1``."""
        n = self._mask
        start = self.state
        bits = np.empty(n, dtype=np.int8)
        for i in range(n):
            bits[i] = self.step()
            if self.state == start and i < n - 1:
                raise LfsrPeriodError(self.order, self.taps, i + 1)
        if self.state != start:
            # The map is a bijection when cell `order` is tapped, so the
            # cycle through `start` is longer than 2**order - 1: impossible.
            raise LfsrPeriodError(self.order, self.taps, -1)
        return bits


def _prime_factors(n: int) -> list[int]:
    out, p = [], 2
    while p * p <= n:
        if n % p == 0:
            out.append(p)
            while n % p == 0:
                n //= p
        p += 1
    if n > 1:
        out.append(n)
    return out


def _gf2_mulmod(a: int, b: int, poly: int, deg: int) -> int:
    r = 0
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
        if (a >> deg) & 1:
            a ^= poly
    return r


def _gf2_powmod(base: int, e: int, poly: int, deg: int) -> int:
    r = 1
    while e:
        if e & 1:
            r = _gf2_mulmod(r, base, poly, deg)
        base = _gf2_mulmod(base, base, poly, deg)
        e >>= 1
    return r


def is_primitive(order: int, taps: Iterable[int]) -> bool:
    """Algebraic primitivity test for the feedback polynomial ``1 + sum x**t``.

    Equivalent to the LFSR having period ``2**order - 1`` but costs
    ``O(order**3)`` instead of clocking the register.
    """
    taps = set(int(t) for t in taps)
    if order not in taps or min(taps) < 1 or max(taps) > order:
        return False
    poly = 1
    for t in taps:
        poly ^= 1 << t
    n = (1 << order) - 1
    x = 2
    if _gf2_powmod(x, n, poly, order) != 1:
        return False
    return all(_gf2_powmod(x, n // q, poly, order) != 1 for q in _prime_factors(n))


def primitive_tap_sets(order: int) -> list[tuple[int, ...]]:
    """Every primitive tap set of the given order, in a fixed canonical order.

    The count equals ``phi(2**order - 1) / order`` (18 for order 7, 16 for
    order 8, 48 for order 9).  Distinct tap sets give distinct (not merely
    shifted) sequences, which is what ``unique`` realizations mean here.
    """
    if not MIN_ORDER <= order <= 16:
        raise ValueError("enumeration is limited to orders 2..16")
    found = []
    for lower in range(1 << (order - 1)):
        taps = (order,) + tuple(t + 1 for t in range(order - 2, -1, -1) if (lower >> t) & 1)
        if is_primitive(order, taps):
            found.append(taps)
    return found


def mlbs(order: int, taps: Sequence[int] | None = None, amplitude: float = 1.0,
         state: int | None = None) -> ExcitationSignal:
    """Maximum-length binary sequence of period ``2**order - 1``.

    Output bit 1 maps to ``+amplitude`` and bit 0 to ``-amplitude``.
    """
    if not MIN_ORDER <= order <= MAX_ORDER:
        raise ValueError(f"order must be in [{MIN_ORDER}, {MAX_ORDER}], got {order}")
    taps = tuple(DEFAULT_TAPS[order] if taps is None else taps)
    reg = Lfsr(order, taps, -1 if state is None else state)
    start = reg.state
    bits = reg.run()
    return _make(amplitude * (2.0 * bits - 1.0), SignalClass.MLBS, amplitude,
                 order=order, taps=list(reg.taps), state=start)


def irmlbs(order: int, taps: Sequence[int] | None = None, amplitude: float = 1.0,
           state: int | None = None) -> ExcitationSignal:
    """Inverse-repeat MLBS: ``u[k] = mlbs[k mod M] * (-1)**k`` over ``2M`` samples."""
    base = mlbs(order, taps, 1.0, state)
    m = base.n
    k = np.arange(2 * m)
    samples = amplitude * base.samples[k % m] * np.where(k % 2 == 0, 1.0, -1.0)
    return _make(samples, SignalClass.IRMLBS, amplitude, order=order,
                 taps=base.meta["taps"], state=base.meta["state"])


def ds_ternary(base, amplitude: float = 1.0) -> ExcitationSignal:
    """Direct-synthesis ternary sequence from a binary base sequence.

    The base (length ``L`` coprime with 6) is repeated six times and
    multiplied sample-wise by the period-6 pattern ``(1, 1, 0, -1, -1, 0)``.
    The product's spectrum is the base spectrum (supported on multiples of
    6) shifted by ``+-N/6 = +-L``, hence confined to bins ``+-1 mod 6``.
    """
    if isinstance(base, ExcitationSignal):
        meta = {k: base.meta[k] for k in ("order", "taps", "state") if k in base.meta}
        b = np.asarray(base.samples, dtype=float)
    else:
        meta = {}
        b = np.asarray(base, dtype=float)
    if b.ndim != 1 or b.size < 1:
        raise ValueError("base must be a non-empty 1-D sequence")
    bmax = np.max(np.abs(b))
    if bmax == 0 or not np.all(np.abs(b) == bmax):
        raise ValueError("DS base sequence must be binary (two levels +-a)")
    if math.gcd(b.size, 6) != 1:
        raise ValueError(f"DS base length {b.size} shares a factor with 6")
    b = b / bmax
    k = np.arange(6 * b.size)
    samples = amplitude * b[k % b.size] * TERNARY_PATTERN[k % 6]
    return _make(samples, SignalClass.DS, amplitude, base_length=b.size, **meta)


def _shifts_to_samples(shift: np.ndarray) -> np.ndarray:
    count, p = shift.shape
    q = np.arange(6)
    # u[qP + i] = m[(q - s_i) mod 6]
    idx = (q[None, :, None] - shift[:, None, :]) % 6
    return TERNARY_PATTERN[idx].reshape(count, 6 * p)


def _rcs_candidates(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    return _shifts_to_samples(rng.integers(0, 6, size=(count, n // 6)))


def _twisted_spectrum(shift: np.ndarray) -> np.ndarray:
    p = shift.shape[-1]
    omega = np.exp(1j * np.pi / 3)
    lam = np.exp(1j * np.pi * np.arange(p) / (3 * p))
    return np.fft.fft(omega ** shift * lam, axis=-1)


def refine_shifts(shift: np.ndarray, sweeps: int) -> np.ndarray:
    """Coordinate descent on the per-residue shifts towards zero off-grid
    autocorrelation.

    With ``z_i = w**s_i`` (``w = exp(i pi/3)``) every off-grid lag ``pP + d``
    of the autocorrelation equals ``(4/N) Re(w**p S_d)``, where ``S_d`` is
    the periodic autocorrelation of ``v_i = z_i exp(i pi i / 3P)``.  The
    off-grid energy is therefore an affine function of ``sum_k |V_k|**4``,
    which is what each step minimizes, one residue at a time.  Rows are
    refined independently.
    """
    shift = np.array(shift, dtype=np.int64, copy=True)
    if shift.ndim != 2:
        raise ValueError("shift must be a (count, P) array")
    count, p = shift.shape
    omega = np.exp(1j * np.pi * np.arange(6) / 3)
    lam = np.exp(1j * np.pi * np.arange(p) / (3 * p))
    kk = np.arange(p)
    rows = np.arange(count)
    for _ in range(sweeps):
        v = _twisted_spectrum(shift)
        for i in range(p):
            basis = lam[i] * np.exp(-2j * np.pi * i * kk / p)
            delta = omega[None, :] - omega[shift[:, i]][:, None]
            trial = v[:, None, :] + delta[:, :, None] * basis[None, None, :]
            cost = np.sum(np.abs(trial) ** 4, axis=-1)
            best = np.argmin(cost, axis=1)
            shift[:, i] = best
            v = trial[rows, best]
    return shift


def rcs_batch(n: int, gens, refine_sweeps: int = 2) -> np.ndarray:
    """Unit-amplitude RCS samples, one row per generator in `gens`.

    Row ``j`` depends only on ``gens[j]``, so the rows match what :func:`rcs`
    returns for the same generators with ``flatten_candidates=1``.
    """
    if n < 6 or n % 6:
        raise ValueError(f"RCS length must be a positive multiple of 6, got {n}")
    shift = np.array([g.integers(0, 6, size=n // 6) for g in gens])
    return _shifts_to_samples(refine_shifts(shift, refine_sweeps))


def spectral_flatness(samples, mask) -> float:
    """``min |U[k]| / max |U[k]|`` over the bins selected by `mask`."""
    a = np.abs(np.fft.fft(samples))[np.asarray(mask)]
    top = a.max()
    return float(a.min() / top) if top > 0 else 0.0


def rcs(n: int, rng=None, flatten_candidates: int = 1, amplitude: float = 1.0,
        refine_sweeps: int = 2) -> ExcitationSignal:
    """Randomized constrained ternary sequence of length ``n`` (a multiple of 6).

    Each residue class ``i mod n/6`` carries a cyclic shift of the period-6
    ternary pattern.  Shifts start uniformly random; when
    `flatten_candidates` > 1 the draw with the flattest magnitude spectrum
    over the excited bins is kept.  `refine_sweeps` passes of
    :func:`refine_shifts` then push the off-grid autocorrelation towards 0.

    Every instance has zero mean, variance ``2/3 * amplitude**2`` and
    autocorrelation ``(2/3, 1/3, -1/3, -2/3, -1/3, 1/3) * amplitude**2`` at
    lags ``q n / 6``.
    """
    if n < 6 or n % 6:
        raise ValueError(f"RCS length must be a positive multiple of 6, got {n}")
    if flatten_candidates < 1:
        raise ValueError("flatten_candidates must be >= 1")
    if refine_sweeps < 0:
        raise ValueError("refine_sweeps must be >= 0")
    gen = _as_rng(rng)
    mask = _class_rule(SignalClass.RCS, n)
    p = n // 6
    while True:
        shifts = gen.integers(0, 6, size=(flatten_candidates, p))
        if flatten_candidates > 1:
            mags = np.abs(np.fft.fft(_shifts_to_samples(shifts), axis=1))[:, mask]
            shifts = shifts[[int(np.argmax(mags.min(axis=1) / mags.max(axis=1)))]]
        samples = _shifts_to_samples(refine_shifts(shifts, refine_sweeps))[0]
        flat = spectral_flatness(samples, mask)
        if flat > n * EXCITED_EPS:
            break
        # an excited bin came out empty; only happens for tiny n
    seed = rng if isinstance(rng, (int, np.integer)) else None
    return _make(amplitude * samples, SignalClass.RCS, amplitude, seed=seed,
                 flatten_candidates=flatten_candidates, refine_sweeps=refine_sweeps, flatness=flat)


def wgn(n: int, rng=None, sigma: float = 1.0) -> ExcitationSignal:
    """White Gaussian noise period with standard deviation `sigma`."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    seed = rng if isinstance(rng, (int, np.integer)) else None
    samples = _as_rng(rng).normal(0.0, sigma, size=n)
    return _make(samples, SignalClass.WGN, sigma, seed=seed, sigma=sigma)


def normalize(signal: ExcitationSignal, target_rms: float) -> ExcitationSignal:
    """Rescale to the requested RMS value.

    For unit-amplitude ternary sequences (variance 2/3) the resulting
    amplitude is ``target_rms * sqrt(3/2)``.
    """
    rms = signal.rms
    if rms == 0:
        raise ValueError("cannot normalize an all-zero signal")
    if target_rms <= 0:
        raise ValueError("target_rms must be > 0")
    factor = target_rms / rms
    meta = dict(signal.meta)
    meta["amplitude"] = signal.amplitude * factor
    meta["rms"] = target_rms
    return ExcitationSignal(np.array(signal.samples * factor), signal.kind,
                            tuple(lv * factor for lv in signal.levels),
                            np.array(signal.excited_bins), meta)


def circular_autocorrelation(signal) -> np.ndarray:
    """``R[r] = (1/N) sum_k u[k] u[(k + r) mod N]``."""
    u = np.asarray(getattr(signal, "samples", signal), dtype=float)
    n = u.size
    U = np.fft.fft(u)
    return np.fft.ifft(np.abs(U) ** 2).real / n


def _class_rule(kind: SignalClass, n: int) -> np.ndarray:
    k = np.arange(n)
    if kind.is_ternary:
        return (k % 6 == 1) | (k % 6 == 5)
    if kind is SignalClass.IRMLBS:
        return k % 2 == 1
    return k != 0


def _verify_excited(sig: ExcitationSignal) -> None:
    a = np.abs(np.fft.fft(sig.samples))
    top = a.max()
    thresh = sig.n * EXCITED_EPS * top
    numeric = a > thresh
    mask = sig.excited_bins
    starved = mask & ~numeric
    leaked = ~mask & numeric
    if sig.kind in (SignalClass.MLBS, SignalClass.WGN):
        leaked[0] = False
    if sig.kind is SignalClass.WGN:
        # random bin magnitudes: only the expected spectrum is flat
        starved[:] = False
    if top == 0 or starved.any() or leaked.any():
        bad = np.flatnonzero(starved | leaked)[:8]
        raise ValueError(f"{sig.kind.value} sequence of length {sig.n} violates its "
                         f"excited-bin rule at bins {bad.tolist()}")


def excited_bins(signal: ExcitationSignal) -> np.ndarray:
    """Excited-bin mask for `signal`, re-derived from its DFT and cross-checked.

    DS/RCS excite bins ``k mod 6 in {1, 5}``, IRMLBS the odd bins, MLBS and
    WGN every bin except DC.  Raises ``ValueError`` when the spectrum
    disagrees with the class rule.
    """
    _verify_excited(signal)
    return _class_rule(signal.kind, signal.n)


# --------------------------------------------------------------------------
# Realization sets
# --------------------------------------------------------------------------


def ds_order_for_length(n: int) -> int:
    """Base MLBS order ``k`` with ``n = 6 (2**k - 1)``."""
    if n % 6 == 0:
        k = int(round(math.log2(n // 6 + 1)))
        if 6 * (2**k - 1) == n and MIN_ORDER <= k <= MAX_ORDER:
            return k
    raise ValueError(f"no MLBS-based DS sequence has length {n}")


def realizations(kind: SignalClass | str, count: int, *, n: int | None = None,
                 order: int | None = None, rng=None,
                 flatten_candidates: int = 1, refine_sweeps: int = 2) -> list[ExcitationSignal]:
    """`count` unique unit-amplitude realizations of one class.

    MLBS-derived classes draw from the distinct primitive tap sets of the
    given order, so `count` is bounded by their number.  RCS and WGN use
    independent substreams of `rng`.
    """
    kind = SignalClass(kind)
    if kind in (SignalClass.RCS, SignalClass.WGN):
        if n is None:
            raise ValueError(f"{kind.value} needs n")
        if isinstance(rng, np.random.SeedSequence):
            seq = rng
        elif isinstance(rng, np.random.Generator):
            seq = np.random.SeedSequence(int(rng.integers(2**63)))
        else:
            seq = np.random.SeedSequence(rng)
        gens = [np.random.default_rng(s) for s in seq.spawn(count)]
        if kind is SignalClass.RCS:
            return [rcs(n, g, flatten_candidates, refine_sweeps=refine_sweeps) for g in gens]
        return [wgn(n, g) for g in gens]
    if kind is SignalClass.DS:
        order = ds_order_for_length(n) if order is None else order
    if order is None:
        raise ValueError(f"{kind.value} needs an order")
    tapsets = primitive_tap_sets(order)
    if count > len(tapsets):
        raise ValueError(f"only {len(tapsets)} unique order-{order} sequences exist, "
                         f"{count} requested")
    out = []
    for taps in tapsets[:count]:
        if kind is SignalClass.MLBS:
            out.append(mlbs(order, taps))
        elif kind is SignalClass.IRMLBS:
            out.append(irmlbs(order, taps))
        else:
            out.append(ds_ternary(mlbs(order, taps)))
    return out


# --------------------------------------------------------------------------
# Export
# --------------------------------------------------------------------------


def signal_to_csv(signal: ExcitationSignal) -> str:
    lines = ["index,value"]
    lines += [f"{i},{v!r}" for i, v in enumerate(signal.samples.tolist())]
    return "\n".join(lines) + "\n"


def signal_metadata(signal: ExcitationSignal) -> dict:
    meta = {"class": signal.kind.value, "N": signal.n,
            "amplitude": signal.amplitude, "rms": signal.rms,
            "seed": signal.meta.get("seed"), "taps": signal.meta.get("taps")}
    for key in ("order", "state", "base_length", "flatten_candidates", "refine_sweeps", "flatness"):
        if key in signal.meta:
            meta[key] = signal.meta[key]
    return meta


def write_signal(signal: ExcitationSignal, path) -> tuple[Path, Path]:
    """Write ``index,value`` CSV plus a JSON sidecar next to it (``<stem>.json``)."""
    path = Path(path)
    side = path.with_suffix(".json")
    _atomic_write(path, signal_to_csv(signal))
    _atomic_write(side, json.dumps(signal_metadata(signal), indent=2, sort_keys=True) + "\n")
    return path, side


def read_signal_csv(path) -> np.ndarray:
    rows = Path(path).read_text().splitlines()
    if not rows or rows[0].strip() != "index,value":
        raise ValueError(f"{path}: expected header 'index,value'")
    return np.array([float(r.split(",")[1]) for r in rows[1:] if r.strip()])
