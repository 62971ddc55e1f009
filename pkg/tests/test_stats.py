import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import normal_cdf
from wienerbla import sequences as sq, stats


def test_two_point_sample_by_hand():
    x = np.tile([-1.0, 1.0], 500)
    span = normal_cdf(2) - normal_cdf(-2)
    # half-open bins: -1 falls in [-1, 0), +1 in the closed last bin [1, 2]
    q_left = (normal_cdf(0) - normal_cdf(-1)) / span
    q_right = (normal_cdf(2) - normal_cdf(1)) / span
    expected = 0.5 * math.log(0.5 / q_left) + 0.5 * math.log(0.5 / q_right)
    assert stats.kl_vs_normal(x, bins=4, span_sigmas=2.0) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(0.7956, abs=1e-4)


def test_large_normal_sample():
    x = np.random.default_rng(0).normal(size=10**6)
    assert stats.kl_vs_normal(x) < 0.005


def test_bin_masses_sum_to_one():
    edges = np.linspace(-3, 5, 21)
    assert stats.normal_bin_mass(edges, 1.0, 2.0).sum() == pytest.approx(1.0, rel=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 10.0), st.floats(-5, 5))
def test_affine_invariance(seed, scale, shift):
    x = np.random.default_rng(seed).uniform(size=500)
    assert stats.kl_vs_normal(scale * x + shift) == pytest.approx(stats.kl_vs_normal(x), abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_nonnegative(seed):
    x = np.random.default_rng(seed).standard_t(3, size=200)
    assert stats.kl_vs_normal(x) >= 0


def test_zero_variance():
    with pytest.raises(ValueError):
        stats.kl_vs_normal(np.ones(10))


def test_histogram_span():
    h = stats.histogram(np.array([-1.0, 1.0] * 10), bins=4, span_sigmas=2.0)
    np.testing.assert_allclose(h.edges, [-2, -1, 0, 1, 2])
    assert h.total == 20


class TestCrestFactor:
    def test_binary(self):
        assert stats.crest_factor(sq.mlbs(7)) == pytest.approx(1.0)

    def test_ternary(self):
        assert stats.crest_factor(sq.rcs(762, 0)) == pytest.approx(math.sqrt(1.5))

    def test_sine(self):
        t = np.arange(1000)
        assert stats.crest_factor(np.sin(2 * np.pi * 5 * t / 1000)) == pytest.approx(math.sqrt(2), rel=1e-9)

    def test_zero(self):
        with pytest.raises(ValueError):
            stats.crest_factor(np.zeros(3))
