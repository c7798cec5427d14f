import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bandunitary.circle import TWO_PI, circular_distance
from bandunitary.disorder import (
    DisorderRealization,
    DomainError,
    PhaseDistribution,
    correlated_verblunski,
    format_distribution,
    parse_distribution,
    sample_phases,
    shift_realization,
)

UNIFORM = PhaseDistribution.uniform()


def test_point_mass_gives_zero_phases():
    om = sample_phases(PhaseDistribution.atomic([0.0]), 123, -2, 3)
    assert np.all(om.phases == 0.0)
    assert om.offset == -2 and len(om.phases) == 5


@given(st.integers(0, 2**64 - 1), st.floats(0.0, 6.0), st.floats(0.0, 1.0))
@settings(max_examples=30, deadline=None)
def test_arc_samples_stay_in_arc(seed, center, delta):
    om = sample_phases(PhaseDistribution.arc(center, delta), seed, -50, 50)
    assert np.all(circular_distance(om.phases, center) <= delta + 1e-12)
    assert np.all((om.phases >= 0) & (om.phases < TWO_PI))


def test_uniform_fourier_moment():
    # CLT: |mean e^{i theta}| has scale 1/sqrt(N) = 0.003 for N = 1e5
    om = sample_phases(UNIFORM, 99, 0, 100_000)
    assert abs(np.mean(np.exp(1j * om.phases))) < 0.02


@given(st.integers(0, 2**63), st.integers(-3000, 3000), st.integers(1, 2500), st.integers(0, 40))
@settings(max_examples=30, deadline=None)
def test_sampling_is_range_independent(seed, start, length, cut):
    """A phase depends only on (seed, stream, index), not on the requested range."""
    om = sample_phases(UNIFORM, seed, start, start + length)
    cut = min(cut, length - 1)
    sub = sample_phases(UNIFORM, seed, start + cut, start + length)
    assert np.array_equal(om.phases[cut:], sub.phases)


def test_streams_differ_and_repeat():
    a = sample_phases(UNIFORM, 5, 0, 100, stream=0)
    b = sample_phases(UNIFORM, 5, 0, 100, stream=1)
    assert not np.array_equal(a.phases, b.phases)
    assert np.array_equal(a.phases, sample_phases(UNIFORM, 5, 0, 100, stream=0).phases)


def test_empty_range_is_domain_error():
    with pytest.raises(DomainError):
        sample_phases(UNIFORM, 0, 3, 3)


def test_realization_is_read_only():
    om = sample_phases(UNIFORM, 1, 0, 4)
    with pytest.raises(ValueError):
        om.phases[0] = 1.0


def test_mixture_samples_in_support():
    d = PhaseDistribution.mixture(0.5, 1.0, 0.1, [3.0, 4.0], [0.5, 0.5])
    om = sample_phases(d, 3, 0, 2000)
    assert np.all(d.support().distance(om.phases) < 1e-12)
    at_atoms = np.isin(om.phases, [3.0, 4.0]).mean()
    assert 0.4 < at_atoms < 0.6


def test_shift_examples():
    om = DisorderRealization(0, -4, np.arange(10) * 0.1)
    assert np.array_equal(shift_realization(om, 0).window(-4, 6), om.window(-4, 6))
    back = shift_realization(shift_realization(om, 1), -1)
    assert np.array_equal(back.window(-2, 4), om.window(-2, 4))
    # (W omega)_0 = omega_2
    assert shift_realization(om, 1)[0] == om[2]
    with pytest.raises(IndexError):
        shift_realization(om, 5)


@given(st.integers(-3, 3), st.integers(-3, 3))
def test_shift_composition(a, b):
    om = sample_phases(UNIFORM, 8, -40, 40)
    lhs = shift_realization(shift_realization(om, a), b)
    rhs = shift_realization(om, a + b)
    assert np.array_equal(lhs.window(-20, 20), rhs.window(-20, 20))


def test_correlated_verblunski_examples():
    zero = DisorderRealization(0, 0, np.zeros(5))
    assert np.all(correlated_verblunski(zero, 0.5).etas == 0.0)
    q = DisorderRealization(0, 0, np.full(3, math.pi / 2))
    assert np.allclose(correlated_verblunski(q, 0.5).etas, [math.pi / 2, math.pi, 3 * math.pi / 2], atol=1e-15)
    v = correlated_verblunski(q, 0.5)
    assert np.allclose(np.abs(v.coefficients), 0.5)
    with pytest.raises(DomainError):
        correlated_verblunski(q, 1.0)


@given(st.integers(0, 2**32))
@settings(max_examples=25, deadline=None)
def test_verblunski_round_trip(seed):
    om = sample_phases(UNIFORM, seed, 0, 64)
    th = correlated_verblunski(om, 0.3).thetas()
    assert np.all(circular_distance(th, om.phases) < 1e-12)


@pytest.mark.parametrize("spec", ["uniform", "arc:1.5,0.3", "atoms:0@0.25;3.14@0.75", "mix:0.5,arc:0,0.2,atoms:1@1"])
def test_spec_round_trip(spec):
    d = parse_distribution(spec)
    assert parse_distribution(format_distribution(d)) == d


@pytest.mark.parametrize("spec", ["", "arc:1", "atoms:1@0.5", "gauss:0,1", "mix:2,arc:0,1,atoms:0@1"])
def test_bad_spec_rejected(spec):
    with pytest.raises(DomainError):
        parse_distribution(spec)
