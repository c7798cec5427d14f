import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bandunitary.disorder import (
    DisorderRealization,
    DomainError,
    PhaseDistribution,
    VerblunskiPhaseSequence,
    correlated_verblunski,
    sample_phases,
    shift_realization,
)
from bandunitary.operators import (
    BandParameters,
    apply_phases,
    band_matvec,
    basis_change_closed_form,
    build_basis_change,
    build_cmv,
    build_S_plus,
    build_S_window,
    build_U_plus,
    build_U_window,
    cmv_conjugation_check,
    cyclicity_identity_check,
    dump_window,
    load_window,
    to_banded,
    unitarity_defect,
)
from bandunitary.circle import circular_distance

UNIFORM = PhaseDistribution.uniform()
ts = st.floats(0.05, 0.95)


def zeros(lo, hi):
    return DisorderRealization(0, lo, np.zeros(hi - lo))


def test_r_from_t():
    p = BandParameters(0.6)
    assert p.r == pytest.approx(0.8, abs=1e-15)
    for bad in (0.0, 1.0, -0.2):
        with pytest.raises(DomainError):
            BandParameters(bad)


def test_small_t_limit_is_identity():
    w = build_S_window(BandParameters(1e-8), 40, -20)
    assert np.abs(w.matrix - np.eye(40)).max() < 1e-7


def test_t_near_one_is_signed_shift():
    w = build_S_window(BandParameters(1 - 1e-8), 40, -20)
    m = w.matrix
    rounded = np.round(m.real)
    assert np.abs(m - rounded).max() < 1e-3
    # one +-1 per column: a signed permutation moving every site by two
    assert np.all(np.abs(rounded).sum(axis=0) == 1)
    rows = np.argmax(np.abs(rounded), axis=0)
    assert np.all(np.abs(rows[1:-1] - np.arange(1, 39)) == 2)


@given(ts)
@settings(max_examples=20, deadline=None)
def test_anchor_entry(t):
    w = build_S_window(BandParameters(t), 30, -10)
    for j in range(2, 28, 2):
        assert w.matrix[j - 2, j] == -t * t


def test_interior_rows_match_pattern():
    p = BandParameters(0.3)
    r, t = p.r, p.t
    m = build_S_window(p, 20, 0).matrix
    for i in range(2, 18):
        row = m[i]
        if i % 2 == 0:
            expect = {i - 1: r * t, i: r * r, i + 1: r * t, i + 2: -t * t}
        else:
            expect = {i - 2: -t * t, i - 1: -r * t, i: r * r, i + 1: -r * t}
        nz = {j: row[j] for j in np.flatnonzero(row)}
        assert nz.keys() == expect.keys()
        assert all(nz[j] == expect[j] for j in expect)


def test_odd_or_tiny_size_rejected():
    with pytest.raises(DomainError):
        build_S_window(BandParameters(0.5), 7)
    with pytest.raises(DomainError):
        build_S_window(BandParameters(0.5), 2)
    with pytest.raises(DomainError):
        build_S_window(BandParameters(0.5), 8, offset=1)


@pytest.mark.parametrize("size", [4, 6, 50, 500])
def test_half_lattice_window(size):
    p = BandParameters(0.4)
    w = build_S_plus(p, size)
    assert w.matrix[0, 0] == -p.r and w.matrix[1, 0] == p.t
    assert unitarity_defect(w.matrix) < 1e-12


def test_wrap_mode_unitary():
    w = build_S_window(BandParameters(0.5), 40, boundary="wrap")
    assert unitarity_defect(w.matrix) < 1e-13
    assert np.count_nonzero(w.matrix) == 4 * 40


def test_apply_phases_examples():
    p = BandParameters(0.5)
    base = build_S_window(p, 20, -10)
    assert np.array_equal(apply_phases(base, zeros(-10, 10)).matrix, base.matrix)
    phi = 0.7
    assert np.abs(apply_phases(base, zeros(-10, 10), phi).matrix - np.exp(-1j * phi) * base.matrix).max() < 1e-15
    with pytest.raises(IndexError):
        apply_phases(base, zeros(-4, 10))


def test_shift_covariance():
    """Entries of U_{W omega} at (j, k) equal those of U_omega at (j + 2, k + 2)."""
    p = BandParameters(0.5)
    om = sample_phases(UNIFORM, 4, -40, 40)
    U = build_U_window(p, om, 30, -16).matrix
    Uw = build_U_window(p, shift_realization(om, 1), 30, -16).matrix
    assert np.array_equal(Uw[1:-3, 1:-3], U[3:-1, 3:-1])


def test_window_determinant_unimodular():
    p = BandParameters(0.5)
    om = sample_phases(UNIFORM, 2, -100, 100)
    for w in (build_U_window(p, om, 100, -50), build_U_plus(p, om, 100)):
        assert abs(abs(np.linalg.det(w.matrix)) - 1) < 1e-10


def test_cmv_entries_zero_phases():
    v = VerblunskiPhaseSequence(np.zeros(10), 0.6)
    m = build_cmv(v, 10).matrix
    r, t = 0.6, 0.8
    assert np.isrealobj(m) or np.abs(m.imag).max() == 0
    assert m[0, 0] == pytest.approx(r) and m[1, 0] == pytest.approx(t) and m[1, 1] == pytest.approx(-r * r)


def test_cmv_display_entries():
    eta = np.random.default_rng(0).uniform(0, 2 * np.pi, 12)
    v = VerblunskiPhaseSequence(eta, 0.6)
    m = build_cmv(v, 12).matrix
    r, t = 0.6, 0.8
    assert abs(m[0, 0] - r * np.exp(-1j * eta[0])) < 1e-15
    assert abs(m[1, 0] - t) < 1e-15
    assert abs(m[0, 1] - r * t * np.exp(-1j * eta[1])) < 1e-15
    assert abs(m[1, 1] + r * r * np.exp(1j * (eta[0] - eta[1]))) < 1e-15
    assert abs(m[0, 2] - t * t) < 1e-15


def test_cmv_unitary_500():
    om = sample_phases(UNIFORM, 1, 0, 500)
    assert unitarity_defect(build_cmv(correlated_verblunski(om, 0.5), 500).matrix) < 1e-12


def test_basis_change_zero_phases():
    b = build_basis_change(np.zeros(8), 0.0, 8).betas
    assert np.allclose(b[1::2], np.pi) and np.allclose(b[0::2], 0.0)


@given(st.integers(0, 2**32), st.floats(0, 2 * np.pi))
@settings(max_examples=25, deadline=None)
def test_basis_change_recursion_matches_closed_form(seed, beta0):
    th = sample_phases(UNIFORM, seed, 0, 40).phases
    a = build_basis_change(th, beta0, 40).betas
    b = basis_change_closed_form(th, beta0, 40)
    assert np.all(circular_distance(a, b) < 1e-12)


def test_beta0_is_a_global_shift():
    th = sample_phases(UNIFORM, 3, 0, 20).phases
    a = build_basis_change(th, 0.0, 20).betas
    b = build_basis_change(th, 0.9, 20).betas
    assert np.all(circular_distance(b - a, 0.9) < 1e-12)


def test_conjugation_examples():
    assert cmv_conjugation_check(VerblunskiPhaseSequence(np.zeros(100), 0.6), 0.0, 100) < 1e-12
    om = sample_phases(UNIFORM, 11, 0, 100)
    v = correlated_verblunski(om, 0.6)
    d = [cmv_conjugation_check(v, b0, 100) for b0 in (0.0, 1.0, 4.0)]
    assert max(d) < 1e-12
    # the default far-edge scalar makes the identity hold on every row
    assert cmv_conjugation_check(v, 0.0, 100, edge_rows=0) < 1e-12


def test_cyclicity_identities_zero_phases():
    U = build_U_window(BandParameters(0.6), zeros(-12, 12), 24, -12)
    assert max(cyclicity_identity_check(U).values()) < 1e-12


@pytest.mark.parametrize("t", [0.2, 0.5, 0.8])
def test_cyclicity_identities_random(t):
    p = BandParameters(t)
    om = sample_phases(UNIFORM, 17, -30, 30)
    assert max(cyclicity_identity_check(build_U_window(p, om, 20, -10)).values()) < 1e-12
    assert max(cyclicity_identity_check(build_U_plus(p, om, 20)).values()) < 1e-12


def test_cyclicity_window_too_small():
    U = build_U_window(BandParameters(0.5), zeros(-4, 4), 8, -4)
    with pytest.raises(DomainError):
        cyclicity_identity_check(U)


def test_band_matvec_matches_dense():
    om = sample_phases(UNIFORM, 5, -20, 20)
    w = build_U_window(BandParameters(0.5), om, 30, -14)
    x = np.random.default_rng(1).normal(size=30) + 0j
    assert np.abs(band_matvec(to_banded(w), x) - w.matrix @ x).max() < 1e-15


def test_dump_round_trip_bit_exact():
    om = sample_phases(UNIFORM, 5, -20, 20)
    w = build_U_window(BandParameters(0.37), om, 16, -8)
    header, body = dump_window(w)
    assert np.array_equal(load_window(header, body), w.matrix)
    assert body.splitlines()[0] == "row,col,re,im"
