"""Experiment pipelines behind ``wienerbla reproduce`` and the scripts.

Every pipeline is a pure function of its configuration and integer seed.
Random classes draw from ``SeedSequence(seed, spawn_key=(class index,))``
so adding or removing a class never changes the others.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import bla, stats, theory
from .ingest import WaveformRecord, oversampled_mask
from .sequences import ExcitationSignal, SignalClass, normalize, realizations
from .wiener import SYSTEMS, IirLowpass, Nonlinearity, StaticNL, WienerModel, simulate

CLASS_ORDER = (SignalClass.DS, SignalClass.RCS, SignalClass.WGN, SignalClass.MLBS, SignalClass.IRMLBS)

# Sequence lengths of the FIR study: DS/RCS/WGN 762, MLBS 511, IRMLBS 2 * 255.
LENGTHS = {SignalClass.DS: {"n": 762}, SignalClass.RCS: {"n": 762}, SignalClass.WGN: {"n": 762},
           SignalClass.MLBS: {"order": 9}, SignalClass.IRMLBS: {"order": 8}}

FIR_COUNTS = {SignalClass.DS: 16, SignalClass.IRMLBS: 16, SignalClass.MLBS: 48,
              SignalClass.RCS: 400, SignalClass.WGN: 400}
CLIPPER_COUNTS = {SignalClass.DS: 16, SignalClass.IRMLBS: 16, SignalClass.MLBS: 48,
                  SignalClass.RCS: 1000, SignalClass.WGN: 1000}

CLIPPER_CUTOFF_HZ = 1600.0
CLIPPER_FS_HZ = 200_000.0
CLIPPER_OVERSAMPLE = 10
CLIPPER_THRESHOLD = 0.6


@dataclass
class ExperimentConfig:
    system: int | None = 1
    fir: tuple[float, ...] | None = None
    nonlinearity: str = "cubic"
    excitation: str = "rcs"
    n: int | None = None
    order: int | None = None
    count: int | None = None
    group_size: int = 4
    seed: int = 0
    rms: float | None = None
    oversample: int = 1
    out_dir: str = "."

    def __post_init__(self):
        kind = SignalClass(self.excitation)
        if self.count is not None and self.count < self.group_size:
            raise ValueError(f"count {self.count} < group size {self.group_size}")
        if self.system is not None and self.system not in SYSTEMS:
            raise ValueError(f"unknown system {self.system}; the benchmark systems are 1-4")
        if self.system is None and not self.fir:
            raise ValueError("custom systems need fir coefficients")
        if kind is SignalClass.RCS and self.n is not None and self.n % 6:
            raise ValueError(f"RCS length {self.n} is not a multiple of 6")

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        data = json.loads(Path(path).read_text())
        if "fir" in data and data["fir"] is not None:
            data["fir"] = tuple(data["fir"])
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @property
    def model(self) -> WienerModel:
        if self.system is not None:
            return SYSTEMS[self.system]
        return WienerModel(fir=self.fir, nl=StaticNL(Nonlinearity(self.nonlinearity)))


def class_seed(seed: int, kind: SignalClass) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(CLASS_ORDER.index(kind),))


def class_signals(kind: SignalClass, count: int, seed: int, **length) -> list[ExcitationSignal]:
    length = length or LENGTHS[kind]
    return realizations(kind, count, rng=class_seed(seed, kind), **length)


def gaussian_matched_rms(g) -> float:
    """Input RMS at which the Gaussian BLA of ``g`` followed by ``x**3`` is ``g`` itself."""
    return 1.0 / math.sqrt(3.0 * theory.alpha2(g))


@dataclass
class ClassResult:
    kind: SignalClass
    estimate: bla.BlaEstimate
    reference: np.ndarray
    scale: float
    realizations: int
    extra: dict = field(default_factory=dict)

    @property
    def mean_abs_ratio_db(self) -> float:
        return bla.mean_abs_deviation(self.estimate, self.reference)[0]

    @property
    def mean_abs_phase_deg(self) -> float:
        return bla.mean_abs_deviation(self.estimate, self.reference)[1]

    def csv(self) -> str:
        return bla.to_csv(self.estimate, self.reference)


def run_fir(model: WienerModel, kind: SignalClass, count: int, seed: int, rms: float | None = None,
            group_size: int = 4, scale: bool = True, signals=None) -> ClassResult:
    """BLA of an FIR Wiener model for one excitation class, LS-scaled to the FIR response."""
    kind = SignalClass(kind)
    sigs = signals if signals is not None else class_signals(kind, count, seed)
    level = gaussian_matched_rms(model.g) if rms is None else rms
    records = [simulate(model, normalize(s, level)) for s in sigs]
    est = bla.estimate(records, group_size, sigs[0].excited_bins)
    ref = bla.frf_fir(model.g, est.n)[est.bins]
    alpha = 1.0
    if scale:
        est, alpha = bla.scale_to_reference(est, ref)
    return ClassResult(kind, est, ref, alpha, len(sigs))


def clipper_model(threshold: float = CLIPPER_THRESHOLD) -> WienerModel:
    return WienerModel(iir=IirLowpass(CLIPPER_CUTOFF_HZ, CLIPPER_FS_HZ),
                       nl=StaticNL(Nonlinearity.HARD_CLIP, threshold), name="clipper")


def clipper_records(kind: SignalClass, count: int, seed: int, rms: float,
                    threshold: float = CLIPPER_THRESHOLD) -> tuple[list[WaveformRecord], np.ndarray]:
    sigs = class_signals(kind, count, seed)
    model = clipper_model(threshold)
    recs = [simulate(model, normalize(s, rms), CLIPPER_OVERSAMPLE) for s in sigs]
    mask = oversampled_mask(sigs[0].excited_bins, CLIPPER_OVERSAMPLE)
    return recs, mask


def run_clipper(kind: SignalClass, count: int, seed: int, rms: float,
                threshold: float = CLIPPER_THRESHOLD, group_size: int = 4) -> ClassResult:
    """Held sequence at 20 kHz -> x10 hold -> first-order lowpass -> hard clip, at 200 kHz.

    The BLA is evaluated on the excited bins up to the generator Nyquist
    frequency and scaled to the lowpass response.
    """
    kind = SignalClass(kind)
    recs, mask = clipper_records(kind, count, seed, rms, threshold)
    est = bla.estimate(recs, group_size, mask)
    ref = clipper_model(threshold).iir.frf(est.freq)
    est, alpha = bla.scale_to_reference(est, ref)
    return ClassResult(kind, est, ref, alpha, len(recs))


def fig2(seed: int, systems=(1, 2, 3, 4), counts=None) -> dict[tuple[int, SignalClass], ClassResult]:
    counts = counts or FIR_COUNTS
    out = {}
    for kind in CLASS_ORDER:
        sigs = class_signals(kind, counts[kind], seed)
        for s in systems:
            out[(s, kind)] = run_fir(SYSTEMS[s], kind, counts[kind], seed, signals=sigs)
    return out


def fig5(seed: int, rms: float, counts=None, threshold: float = CLIPPER_THRESHOLD) -> dict[SignalClass, ClassResult]:
    counts = counts or CLIPPER_COUNTS
    return {k: run_clipper(k, counts[k], seed, rms, threshold) for k in CLASS_ORDER}


def fig4(seed: int, instances: int = 1000, n: int = 762, lags: int = 11):
    model = SYSTEMS[1]
    mc = theory.monte_carlo_xcorr(model, n, instances, seed)
    return theory.fig4_table(model.g, n, mc, lags), mc


def table2(seed: int, counts=None, bins: int = stats.DEFAULT_BINS,
           span_sigmas: float = stats.DEFAULT_SPAN_SIGMAS) -> dict[SignalClass, float]:
    """Mean per-period KL divergence from normality at the output of System 2's FIR block."""
    counts = counts or FIR_COUNTS
    out = {}
    for kind in CLASS_ORDER:
        sigs = class_signals(kind, counts[kind], seed)
        vals = [stats.kl_vs_normal(SYSTEMS[2].linear(s), bins, span_sigmas) for s in sigs]
        out[kind] = float(np.mean(vals))
    return out
