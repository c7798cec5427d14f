import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bandunitary.circle import TWO_PI
from bandunitary.disorder import DisorderRealization, DomainError, PhaseDistribution, sample_phases
from bandunitary.operators import BandParameters, build_diagonal, build_U_plus, build_U_window
from bandunitary.spectral import (
    NonUnitaryError,
    almost_sure_spectrum,
    edge_mass,
    eig_unitary,
    krylov_cyclicity,
    krylov_matrix,
    localization_report,
    participation_ratio,
    spectral_averaging_experiment,
    spectral_measure,
    spectrum_of_S,
)

UNIFORM = PhaseDistribution.uniform()


def test_spectrum_of_S_examples():
    assert spectrum_of_S(0.0).arcs == ((0.0, 0.0),)
    assert spectrum_of_S(1 / math.sqrt(2)).arcs[0][1] == pytest.approx(math.pi / 2)
    assert spectrum_of_S(1.0).is_full
    with pytest.raises(DomainError):
        spectrum_of_S(1.5)


def test_almost_sure_spectrum_examples():
    assert almost_sure_spectrum(PhaseDistribution.atomic([0.0]), 0.5) == spectrum_of_S(0.5)
    assert almost_sure_spectrum(UNIFORM, 0.5).is_full
    h = math.acos(1 - 2 * 0.25)
    s = almost_sure_spectrum(PhaseDistribution.arc(0.0, 0.3), 0.5)
    assert len(s.arcs) == 1 and s.arcs[0][1] == pytest.approx(0.3 + h)


def test_window_eigenphases_inside_rotated_band():
    """Eigenphases of a deterministic S window lie in the band arc."""
    from bandunitary.operators import build_S_window
    dec = eig_unitary(build_S_window(BandParameters(0.5), 200, -100, boundary="wrap"))
    assert np.all(spectrum_of_S(0.5).distance(dec.eigenphases) < 1e-9)


def test_eig_diagonal():
    th = np.array([0.1, 2.0, 4.0, 5.5])
    dec = eig_unitary(np.diag(np.exp(-1j * th)))
    assert np.allclose(np.sort(dec.eigenphases), np.sort((-th) % TWO_PI))


def test_eig_reflection():
    r, t = 0.6, 0.8
    dec = eig_unitary(np.array([[r, t], [t, -r]]))
    assert np.allclose(dec.eigenphases, [0.0, math.pi], atol=1e-12)


def test_eig_random_window():
    om = sample_phases(UNIFORM, 3, -250, 250)
    U = build_U_window(BandParameters(0.5), om, 500, -250)
    dec = eig_unitary(U)
    assert dec.residual < 1e-9
    V = dec.eigenvectors
    assert np.abs(V.conj().T @ V - np.eye(500)).max() < 1e-9
    assert np.all(np.diff(dec.eigenphases) >= 0)
    assert np.abs(np.abs(np.linalg.eigvals(U.matrix)) - 1).max() < 1e-10


def test_eig_refuses_non_unitary():
    with pytest.raises(NonUnitaryError) as err:
        eig_unitary(np.diag([1.0, 1.1]))
    assert err.value.defect == pytest.approx(0.21)


def test_spectral_measure_moments_match_powers():
    om = sample_phases(UNIFORM, 6, -40, 40)
    U = build_U_window(BandParameters(0.5), om, 60, -30)
    dec = eig_unitary(U)
    mu = spectral_measure(dec, 0)
    assert abs(mu.mass - 1) < 1e-10
    e = U.unit(0)
    for n in range(-10, 11):
        direct = e @ np.linalg.matrix_power(U.matrix, n) @ e if n >= 0 else \
            e @ np.linalg.matrix_power(U.matrix.conj().T, -n) @ e
        assert abs(mu.moment(n) - direct) < 1e-9
    with pytest.raises(IndexError):
        spectral_measure(dec, 100)


def test_diagonal_measure_is_single_atom():
    om = sample_phases(UNIFORM, 6, -10, 10)
    dec = eig_unitary(build_diagonal(om, 20, -10))
    mu = spectral_measure(dec, 3)
    assert np.sum(mu.weights > 1e-12) == 1
    assert mu.phases[np.argmax(mu.weights)] == pytest.approx((-om[3]) % TWO_PI)


def test_spectral_averaging_small():
    om = sample_phases(UNIFORM, 2, -60, 60)
    m = spectral_averaging_experiment(om, 64, 60, 0.5, n_max=10)
    assert abs(m[0] - 1) < 1e-12
    # the averaged moment is a trig polynomial of degree <= n in theta_0,
    # so the 64-point rule integrates it exactly
    assert np.abs(m[1:]).max() < 1e-12
    with pytest.raises(DomainError):
        spectral_averaging_experiment(om, 32, 60, 0.5)


def test_krylov_diagonal_control():
    om = sample_phases(UNIFORM, 2, -20, 20)
    D = build_diagonal(om, 20, -10)
    assert krylov_cyclicity(D, [-1, 0], 10)[0] == 2
    assert krylov_cyclicity(D, [0], 20)[0] == 1
    assert krylov_cyclicity(D, [-1, 0], 10, method="arnoldi")[0] == 2


def test_krylov_matrix_columns():
    om = sample_phases(UNIFORM, 2, -20, 20)
    U = build_U_window(BandParameters(0.5), om, 20, -10)
    K = krylov_matrix(U, [0], 2)
    e = U.unit(0)
    M = U.matrix
    assert np.allclose(K[:, 1], M @ e) and np.allclose(K[:, 2], M.conj().T @ e)
    assert np.allclose(K[:, 3], M @ M @ e)


@pytest.mark.parametrize("seed", range(5))
def test_orthonormal_krylov_full_rank(seed):
    om = sample_phases(UNIFORM, seed, -40, 40)
    p = BandParameters(0.5)
    assert krylov_cyclicity(build_U_window(p, om, 40, -20), [-1, 0], 20, method="arnoldi")[0] == 40
    assert krylov_cyclicity(build_U_plus(p, om, 40), [0], 40, method="arnoldi")[0] == 40


def test_participation_and_edge_mass():
    V = np.eye(6)
    assert np.allclose(participation_ratio(V), 1)
    flat = np.ones((6, 1)) / math.sqrt(6)
    assert participation_ratio(flat)[0] == pytest.approx(6)
    assert edge_mass(V, 1)[[0, 5]].tolist() == [1.0, 1.0]


def test_localization_report_shape():
    rep = localization_report(UNIFORM, 0.5, 200, 3, 1, lyapunov_steps=2000, lyapunov_runs=4, jobs=2)
    assert rep["summary"]["insulated"]["count"] > 0
    assert rep["summary"]["insulated"]["median_decay_rate"] > 0
    assert rep["inside_fraction"] == 1.0  # full circle
    assert sum(rep["histogram"]["count"]) == 600
    assert "eps" in rep["calibrated"]


def test_localization_report_deterministic_control():
    det = PhaseDistribution.atomic([0.0])
    a = localization_report(det, 0.5, 200, 1, 0, lyapunov_steps=500, lyapunov_runs=2)
    b = localization_report(det, 0.5, 400, 1, 0, lyapunov_steps=500, lyapunov_runs=2)
    ratio = b["summary"]["all"]["mean_participation"] / a["summary"]["all"]["mean_participation"]
    assert 1.8 < ratio < 2.2
    assert a["summary"]["all"]["median_decay_rate"] < 0.01


def test_report_independent_of_jobs():
    a = localization_report(UNIFORM, 0.5, 200, 3, 9, lyapunov_steps=500, lyapunov_runs=2, jobs=1)
    b = localization_report(UNIFORM, 0.5, 200, 3, 9, lyapunov_steps=500, lyapunov_runs=2, jobs=3)
    assert a["summary"]["all"]["mean_participation"] == b["summary"]["all"]["mean_participation"]
    assert np.array_equal(a["histogram"]["count"], b["histogram"]["count"])
