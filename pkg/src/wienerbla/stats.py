"""Gaussianity diagnostics: histograms, KL divergence to a fitted normal, crest factor."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

DEFAULT_BINS = 50
DEFAULT_SPAN_SIGMAS = 4.0


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        if self.edges.size != self.counts.size + 1 or np.any(np.diff(self.edges) <= 0):
            raise ValueError("edges must be strictly increasing with len(counts) + 1 entries")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def probabilities(self) -> np.ndarray:
        return self.counts / self.total


def histogram(samples, bins: int = DEFAULT_BINS, span_sigmas: float = DEFAULT_SPAN_SIGMAS) -> Histogram:
    """Counts over ``mean +- span_sigmas * std``; samples outside are not counted."""
    x = np.asarray(samples, dtype=float).ravel()
    mu, sd = x.mean(), x.std()
    if not sd > 0:
        raise ValueError("samples have zero variance")
    edges = np.linspace(mu - span_sigmas * sd, mu + span_sigmas * sd, bins + 1)
    counts, _ = np.histogram(x, edges)
    return Histogram(edges, counts)


def normal_bin_mass(edges, mu: float, sd: float) -> np.ndarray:
    """Probability of each bin under ``N(mu, sd**2)``, renormalized to the span."""
    cdf = ndtr((np.asarray(edges) - mu) / sd)
    mass = np.diff(cdf)
    return mass / (cdf[-1] - cdf[0])


def _merge_empty_reference(p: np.ndarray, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # fold bins whose normal mass underflowed into their inner neighbour
    p, q = list(p), list(q)
    i = 0
    while i < len(q):
        if q[i] == 0 and p[i] > 0:
            j = i + 1 if i < len(q) / 2 else i - 1
            p[j] += p[i]
            q[j] += q[i]
            del p[i], q[i]
            i = max(i - 1, 0)
        else:
            i += 1
    return np.array(p), np.array(q)


def kl_vs_normal(samples, bins: int = DEFAULT_BINS, span_sigmas: float = DEFAULT_SPAN_SIGMAS) -> float:
    """``sum p ln(p / q)`` between the sample histogram and the normal fitted
    by sample mean and variance, both restricted to ``+-span_sigmas``."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise ValueError("need at least two samples")
    h = histogram(x, bins, span_sigmas)
    p = h.probabilities
    q = normal_bin_mass(h.edges, x.mean(), x.std())
    if np.any((q == 0) & (p > 0)):
        warnings.warn("normal mass underflowed in occupied bins; widening those bins", RuntimeWarning,
                      stacklevel=2)
        p, q = _merge_empty_reference(p, q)
    nz = p > 0
    return float(max(np.sum(p[nz] * np.log(p[nz] / q[nz])), 0.0))


def crest_factor(samples) -> float:
    x = np.asarray(getattr(samples, "samples", samples), dtype=float)
    rms = np.sqrt(np.mean(x**2))
    if rms == 0:
        raise ValueError("crest factor undefined for an all-zero signal")
    return float(np.max(np.abs(x)) / rms)
