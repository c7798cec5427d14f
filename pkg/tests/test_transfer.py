import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bandunitary.disorder import DisorderRealization, DomainError, PhaseDistribution, sample_phases
from bandunitary.operators import BandParameters, build_U_plus, build_U_window
from bandunitary.transfer import (
    FitError,
    GeneralizedEigenvector,
    build_generalized_eigenvector_full,
    build_generalized_eigenvector_half,
    cocycle,
    decay_rate_fit,
    half_lattice_seed,
    lyapunov_estimate,
    lyapunov_sweep,
    transfer_matrix,
    transfer_matrix_dtheta,
)

UNIFORM = PhaseDistribution.uniform()
angles = st.floats(0.0, 2 * np.pi)


def test_frozen_values():
    p = BandParameters(0.5)
    assert np.abs(transfer_matrix(0.0, 0.0, p) + np.eye(2)).max() < 1e-15
    expect = np.array([[1.0, 0.0], [2 * p.r / p.t, -1.0]])
    assert np.abs(transfer_matrix(0.0, np.pi, p) - expect).max() < 1e-14


@given(angles, angles, st.floats(0.3, 0.95))
def test_determinant(theta, eta, t):
    d = np.linalg.det(transfer_matrix(theta, eta, BandParameters(t)))
    assert abs(d - np.exp(1j * (theta - eta))) < 1e-13


@given(angles, angles)
def test_analytic_derivative(theta, eta):
    p = BandParameters(0.5)
    h = 1e-6
    fd = (transfer_matrix(theta + h, eta, p) - transfer_matrix(theta - h, eta, p)) / (2 * h)
    assert np.abs(fd - transfer_matrix_dtheta(theta, eta, p)).max() < 1e-7


def test_cocycle_identity_and_constant():
    p = BandParameters(0.5)
    om = DisorderRealization(0, -10, np.zeros(20))
    c0 = cocycle(om, 0.0, 0, p)
    assert np.array_equal(c0.product, np.eye(2)) and c0.log_norm_sum == 0.0
    c3 = cocycle(om, 0.0, 3, p)
    full = math.exp(c3.log_norm_sum) * c3.product
    assert np.abs(full + np.eye(2)).max() < 1e-14


def test_forward_then_inverse_is_identity():
    p = BandParameters(0.5)
    k = 200
    om = sample_phases(UNIFORM, 3, 0, 2 * k)
    fwd = cocycle(om, 0.4, k, p)
    M = math.exp(fwd.log_norm_sum) * fwd.product
    inv = np.eye(2, dtype=complex)
    for j in reversed(range(k)):
        inv = inv @ transfer_matrix(om[2 * j] + 0.4, om[2 * j + 1] + 0.4, p)
    # inv currently holds the same product; compare as relative error
    assert np.abs(M - inv).max() / np.abs(inv).max() < 1e-10 * k


def test_backward_cocycle_inverts_negative_side():
    p = BandParameters(0.5)
    k = 30
    om = sample_phases(UNIFORM, 3, -2 * k, 0)
    back = cocycle(om, 0.1, k, p, direction="backward")
    M = np.eye(2, dtype=complex)
    for j in range(1, k + 1):
        M = np.linalg.inv(transfer_matrix(om[-2 * j] + 0.1, om[-2 * j + 1] + 0.1, p)) @ M
    got = math.exp(back.log_norm_sum) * back.product
    assert np.abs(got - M).max() / np.abs(M).max() < 1e-10


def test_determinant_preserved_over_long_products():
    p = BandParameters(0.5)
    om = sample_phases(UNIFORM, 1, 0, 2_000_000)
    c = cocycle(om, 0.0, 1_000_000, p)
    assert abs(c.log_abs_det()) < 1e-8


def test_alpha_shift_structure_exact():
    p = BandParameters(0.5)
    om = sample_phases(UNIFORM, 2, 0, 400)
    shifted = DisorderRealization(0, 0, (om.phases + 0.3))
    a = cocycle(om, 0.3, 200, p)
    b = cocycle(shifted, 0.0, 200, p)
    assert np.abs(a.product - b.product).max() < 1e-12
    assert abs(a.log_norm_sum - b.log_norm_sum) < 1e-10


def test_deterministic_lyapunov_oracle():
    p = BandParameters(0.5)
    nu = PhaseDistribution.atomic([0.0])
    inside = lyapunov_estimate(nu, p, 0.3, 20_000, 2, 0)
    assert inside.gamma_hat < 0.02
    alpha = 2.5
    ev = np.linalg.eigvals(transfer_matrix(alpha, alpha, p))
    outside = lyapunov_estimate(nu, p, alpha, 20_000, 2, 0)
    assert abs(outside.gamma_hat - math.log(np.abs(ev).max())) < 0.01


def test_uniform_lyapunov_positive_and_consistent():
    p = BandParameters(0.5)
    f = lyapunov_estimate(UNIFORM, p, 1.0, 5000, 10, 4)
    b = lyapunov_estimate(UNIFORM, p, 1.0, 5000, 10, 4, direction="backward")
    assert f.gamma_hat - 3 * f.std_error > 0
    assert abs(f.gamma_hat - b.gamma_hat) < 3 * math.hypot(f.std_error, b.std_error)
    assert f.gamma_per_site == 0.5 * f.gamma_hat
    assert f.std_error == pytest.approx(np.std(f.per_run, ddof=1) / math.sqrt(10))


def test_sweep_reproducible():
    p = BandParameters(0.5)
    a = lyapunov_sweep(UNIFORM, p, [0.0, 1.0], 1000, 3, 9)
    b = lyapunov_sweep(UNIFORM, p, [0.0, 1.0], 1000, 3, 9)
    assert [e.gamma_hat for e in a] == [e.gamma_hat for e in b]
    with pytest.raises(DomainError):
        lyapunov_sweep(UNIFORM, p, [0.0], 1000, 1, 9)


def _row_residual(U, psi_window, alpha, rows):
    r = U @ psi_window - np.exp(1j * alpha) * psi_window
    return np.abs(r[rows]).max() / np.abs(psi_window).max()


def test_full_lattice_eigenvector_solves_window_rows():
    p = BandParameters(0.5)
    om = sample_phases(UNIFORM, 21, -60, 60)
    alpha = 1.1
    g = build_generalized_eigenvector_full(om, alpha, (0.3 + 0.1j, 1.0), p, 10, 10)
    U = build_U_window(p, om, 40, -20).matrix
    psi = np.array([g[k] for k in range(-20, 20)])
    # rows whose band stays inside the solved range
    assert _row_residual(U, psi, alpha, slice(2, 38)) < 1e-10


def test_full_lattice_linearity():
    p = BandParameters(0.5)
    om = sample_phases(UNIFORM, 21, -60, 60)
    a = build_generalized_eigenvector_full(om, 0.5, (1.0, 2.0), p, 8, 8)
    b = build_generalized_eigenvector_full(om, 0.5, (3.0j, 6.0j), p, 8, 8)
    assert np.abs(b.coefficients - 3j * a.coefficients).max() < 1e-12 * np.abs(b.coefficients).max()
    with pytest.raises(DomainError):
        build_generalized_eigenvector_full(om, 0.5, (0, 0), p, 8, 8)


def test_deterministic_band_solution_bounded():
    p = BandParameters(0.5)
    om = DisorderRealization(0, -2000, np.zeros(4000))
    g = build_generalized_eigenvector_full(om, 0.3, (1.0, 1.0), p, 1000, 0)
    assert np.abs(g.coefficients).max() < 100


def test_half_lattice_seed_example():
    p = BandParameters(0.5)
    om = DisorderRealization(0, 0, np.zeros(4))
    c1, c2 = half_lattice_seed(om, 0.0, 1.0, p)
    assert abs(c1 - (1 + p.r) / p.t) < 1e-14
    assert abs(c2 + 1) < 1e-14


def test_half_lattice_eigenvector_solves_window_rows():
    p = BandParameters(0.5)
    om = sample_phases(UNIFORM, 8, 0, 80)
    alpha = 2.0
    g = build_generalized_eigenvector_half(om, alpha, 1.0, p, 20)
    U = build_U_plus(p, om, 30).matrix
    psi = g.coefficients[:30]
    assert _row_residual(U, psi, alpha, slice(0, 28)) < 1e-10
    g2 = build_generalized_eigenvector_half(om, alpha, 2.0, p, 20)
    assert np.abs(g2.coefficients - 2 * g.coefficients).max() < 1e-12 * np.abs(g2.coefficients).max()


def test_decay_fit_exact():
    k = np.arange(-50, 51)
    rate, res = decay_rate_fit(np.exp(-0.3 * np.abs(k)), k)
    assert abs(rate - 0.3) < 1e-12 and res < 1e-12


def test_decay_fit_noisy():
    rng = np.random.default_rng(0)
    k = np.arange(-50, 51)
    c = np.exp(-0.3 * np.abs(k)) * (1 + 0.1 * rng.uniform(-1, 1, len(k)))
    rate, _ = decay_rate_fit(c, k)
    assert abs(rate - 0.3) < 0.02


def test_decay_fit_needs_points():
    with pytest.raises(FitError):
        decay_rate_fit(np.exp(-np.arange(10.0)))
    v = np.zeros(50)
    v[0] = 1.0
    with pytest.raises(FitError):
        decay_rate_fit(v)


def test_decay_fit_accepts_generalized_eigenvector():
    k = np.arange(-30, 31)
    g = GeneralizedEigenvector(np.exp(-0.2 * np.abs(k)) + 0j, -30, 0.0, (1.0,))
    assert decay_rate_fit(g)[0] == pytest.approx(0.2, abs=1e-12)
