"""Closed-form input/output cross-correlations for cubic Wiener systems.

For an RCS input of period ``N`` and an FIR block ``g`` of length
``H < N/6`` followed by ``x**3``,

    R_yu = 2 a2 (g (*) R_u) - (g**3 (*) R_u),     a2 = sum g**2,

with ``(*)`` circular convolution and ``R_u`` the ideal RCS
autocorrelation.  Since ``R_u`` lives on the grid of multiples of ``N/6``
and ``H < N/6``, at most one term of each convolution survives, giving
the pointwise form ``g[r_m] R_u[r_q] (2 a2 - g[r_m]**2)`` with ``r_q`` the
largest multiple of ``N/6`` not exceeding ``r`` and ``r_m = r - r_q``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dsp
from .sequences import rcs, rcs_batch
from .wiener import Nonlinearity, WienerModel, apply_nonlinearity, fir_steady_state

# autocorrelation of a unit-amplitude RCS at lags q N/6, q = 0..5
RCS_GRID_AUTOCORR = np.array([2 / 3, 1 / 3, -1 / 3, -2 / 3, -1 / 3, 1 / 3])

EQ_AGREEMENT_TOL = 1e-12


@dataclass(frozen=True)
class CrossCorrelation:
    """Correlation values at lags ``0..N-1`` (``std`` is the per-lag
    sample standard deviation across Monte Carlo instances, if any)."""

    values: np.ndarray
    std: np.ndarray | None = None
    instances: int = 0

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("cross-correlation values must be finite")

    @property
    def n(self) -> int:
        return self.values.size

    def __getitem__(self, lag):
        return self.values[lag]

    def stderr(self) -> np.ndarray:
        if self.std is None or self.instances < 1:
            raise ValueError("no Monte Carlo spread attached")
        return self.std / np.sqrt(self.instances)


def alpha2(g) -> float:
    g = np.asarray(g, dtype=float)
    if g.size < 1:
        raise ValueError("g must be non-empty")
    return float(np.sum(g**2))


def ideal_rcs_autocorrelation(n: int, amplitude: float = 1.0) -> np.ndarray:
    if n < 6 or n % 6:
        raise ValueError(f"RCS length must be a positive multiple of 6, got {n}")
    r = np.zeros(n)
    r[:: n // 6] = RCS_GRID_AUTOCORR * amplitude**2
    return r


def _check_hypothesis(g: np.ndarray, n: int) -> None:
    if n < 6 or n % 6:
        raise ValueError(f"N must be a positive multiple of 6, got {n}")
    if not g.size < n // 6:
        raise ValueError(f"FIR length H={g.size} violates H < N/6 = {n // 6}; "
                         "the closed form needs the filter memory inside one sixth of the period")


def _circ_conv(h: np.ndarray, r: np.ndarray) -> np.ndarray:
    out = np.zeros_like(r)
    for k, c in enumerate(h):
        out += c * np.roll(r, k)
    return out


def xcorr_rcs_cubic_convolution(g, n: int, amplitude: float = 1.0) -> np.ndarray:
    """Convolution form ``2 a2 (g (*) R_u) - (g**3 (*) R_u)``."""
    g = np.asarray(g, dtype=float)
    _check_hypothesis(g, n)
    ru = ideal_rcs_autocorrelation(n, amplitude)
    return 2 * alpha2(g) * amplitude**2 * _circ_conv(g, ru) - amplitude**2 * _circ_conv(g**3, ru)


def xcorr_rcs_cubic_pointwise(g, n: int, amplitude: float = 1.0) -> np.ndarray:
    """Pointwise form ``g[r_m] R_u[r_q] (2 a2 - g[r_m]**2)``."""
    g = np.asarray(g, dtype=float)
    _check_hypothesis(g, n)
    p = n // 6
    r = np.arange(n)
    r_q = (r // p) * p
    r_m = r - r_q
    ru = ideal_rcs_autocorrelation(n, amplitude)
    gm = np.where(r_m < g.size, g[np.minimum(r_m, g.size - 1)], 0.0)
    return amplitude**2 * gm * ru[r_q] * (2 * alpha2(g) - gm**2)


def xcorr_rcs_cubic(g, n: int, amplitude: float = 1.0) -> CrossCorrelation:
    """``R_yu`` for an RCS of the given amplitude driving ``g`` then ``x**3``.

    Both closed forms are evaluated and must agree to 1e-12.  The result
    scales with ``amplitude**4``.
    """
    conv = xcorr_rcs_cubic_convolution(g, n, amplitude)
    point = xcorr_rcs_cubic_pointwise(g, n, amplitude)
    gap = float(np.max(np.abs(conv - point)))
    if gap >= EQ_AGREEMENT_TOL * max(1.0, float(np.max(np.abs(conv)))):
        raise ArithmeticError(f"closed forms disagree by {gap:.3e}")
    return CrossCorrelation(conv)


def xcorr_gaussian_cubic(g) -> CrossCorrelation:
    """Unit-variance white Gaussian input: ``3 a2 g[r]`` on lags ``0..H-1``."""
    g = np.asarray(g, dtype=float)
    return CrossCorrelation(3 * alpha2(g) * g)


def xcorr_rcs_cubic_unitvar(g) -> CrossCorrelation:
    """Unit-variance RCS (amplitude ``sqrt(3/2)``), lags ``|r| < N/6``:
    ``3 a2 g[r] - 1.5 g[r]**3``."""
    g = np.asarray(g, dtype=float)
    return CrossCorrelation(3 * alpha2(g) * g - 1.5 * g**3)


def bias_vs_gaussian(g, input_class: str = "rcs") -> np.ndarray:
    """Deviation of the unit-variance cross-correlation from ``3 a2 g``:
    ``-1.5 g**3`` for RCS, ``-2 g**3`` for random binary sequences."""
    g = np.asarray(g, dtype=float)
    coef = {"rcs": 1.5, "binary": 2.0, "gaussian": 0.0}[input_class]
    return -coef * g**3


def fit_cubic_bias(r_yu, g) -> float:
    """Least-squares ``c`` in ``R_yu[r] - 3 a2 g[r] = -c g[r]**3`` over ``r < H``."""
    g = np.asarray(g, dtype=float)
    dev = np.asarray(r_yu, dtype=float)[: g.size] - 3 * alpha2(g) * g
    g3 = g**3
    return float(-np.dot(dev, g3) / np.dot(g3, g3))


def monte_carlo_xcorr(model: WienerModel, n: int, instances: int, rng=None,
                      amplitude: float = 1.0, flatten_candidates: int = 1,
                      refine_sweeps: int = 2, inputs=None) -> CrossCorrelation:
    """Average circular cross-correlation ``(1/N) sum_t y[t] u[t - r]`` over
    `instances` independent RCS inputs.

    Instance ``i`` uses the ``i``-th spawned child of the seed, so results
    do not depend on batch layout.  `inputs` may override the generator
    with a callable ``(n, generator) -> ndarray``.
    """
    if instances < 1:
        raise ValueError("instances must be >= 1")
    if model.fir is None:
        raise ValueError("Monte Carlo cross-correlation needs an FIR model")
    if model.nl.kind not in (Nonlinearity.CUBIC, Nonlinearity.CUBIC_PLUS_SQUARE):
        raise ValueError("closed form covers cubic and cubic+square nonlinearities only")
    seed = rng if not hasattr(rng, "integers") else rng.integers(2**63)
    children = np.random.SeedSequence(seed).spawn(instances)
    acc = np.zeros(n)
    acc2 = np.zeros(n)
    batch = 256
    for start in range(0, instances, batch):
        gens = [np.random.default_rng(c) for c in children[start:start + batch]]
        if inputs is None and flatten_candidates == 1:
            u = amplitude * rcs_batch(n, gens, refine_sweeps)
        elif inputs is None:
            u = np.array([rcs(n, g, flatten_candidates, amplitude, refine_sweeps).samples for g in gens])
        else:
            u = np.array([inputs(n, g) for g in gens])
        y = apply_nonlinearity(model.nl, fir_steady_state(model.g, u))
        r = dsp.circular_xcorr(y, u)
        acc += r.sum(axis=0)
        acc2 += (r**2).sum(axis=0)
    mean = acc / instances
    var = np.maximum(acc2 / instances - mean**2, 0.0) * instances / max(instances - 1, 1)
    return CrossCorrelation(mean, np.sqrt(var), instances)


def fig4_table(g, n: int, mc: CrossCorrelation, lags: int = 11) -> list[tuple[int, float, float, float]]:
    conv = xcorr_rcs_cubic_convolution(g, n)
    point = xcorr_rcs_cubic_pointwise(g, n)
    return [(r, float(conv[r]), float(point[r]), float(mc.values[r])) for r in range(lags)]
