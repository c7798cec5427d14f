"""Transfer matrices, the cocycle Phi(k, omega), Lyapunov estimates and
generalized eigenvectors.

Conventions: one transfer step maps (c_{2k-1}, c_{2k}) to (c_{2k+1}, c_{2k+2})
and uses the phases at sites 2k and 2k+1 shifted by alpha.  Lyapunov
exponents are reported per step; the per-site rate is half of that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .disorder import DisorderRealization, DomainError, PhaseDistribution, sample_phases
from .kernels import cocycle_batch, log_det_batch
from .operators import BandParameters

DEFAULT_BURN_IN = 100


def transfer_matrix(theta: float, eta: float, p: BandParameters) -> np.ndarray:
    """T(theta, eta); determinant exp(i(theta - eta))."""
    r, t = p.r, p.t
    ez = np.exp(-1j * eta)
    ex = np.exp(1j * theta)
    exz = np.exp(1j * (theta - eta))
    q = r / t
    return np.array([
        [-ez, q * (exz - ez)],
        [q * (1.0 - ez), -ex / t**2 + (r**2 / t**2) * ((exz + 1.0) - ez)],
    ])


def transfer_matrix_dtheta(theta: float, eta: float, p: BandParameters) -> np.ndarray:
    """Analytic partial derivative of T(theta, eta) in theta."""
    r, t = p.r, p.t
    exz = np.exp(1j * (theta - eta))
    return np.array([
        [0.0, 1j * (r / t) * exz],
        [0.0, -1j * np.exp(1j * theta) / t**2 + 1j * (r**2 / t**2) * exz],
    ])


@dataclass
class CocycleProduct:
    """Renormalized product; the true product is exp(log_norm_sum) * product.

    ``log_det`` is log|det| of the true product, accumulated separately since
    the renormalized product loses its small singular value.
    """

    product: np.ndarray
    log_norm_sum: float
    steps: int
    direction: str = "forward"
    log_det: float = 0.0

    @property
    def log_norm(self) -> float:
        return self.log_norm_sum + math.log(np.linalg.norm(self.product))

    def log_abs_det(self) -> float:
        """log |det| of the unrenormalized product."""
        return self.log_det


def _pair_phases(omega: DisorderRealization, k: int, direction: str):
    """Phases (theta_{2j}, theta_{2j+1}) of the k matrices entering Phi(+-k)."""
    if direction == "forward":
        ph = omega.window(0, 2 * k)
    elif direction == "backward":
        # T(-1), T(-2), ..., T(-k) in the order they are applied
        ph = omega.window(-2 * k, 0).reshape(k, 2)[::-1].ravel()
    else:
        raise DomainError(f"unknown direction {direction!r}")
    return ph[0::2], ph[1::2]


def cocycle(
    omega: DisorderRealization, alpha: float, k: int, p: BandParameters, direction: str = "forward"
) -> CocycleProduct:
    """Phi(k, omega) (forward) or Phi(-k, omega) (backward) at spectral shift alpha."""
    if k < 0:
        raise DomainError("k counts steps and must be nonnegative")
    if k == 0:
        return CocycleProduct(np.eye(2, dtype=complex), 0.0, 0, direction)
    even, odd = _pair_phases(omega, k, direction)
    x, z = np.exp(1j * even), np.exp(-1j * odd)
    inverse = direction == "backward"
    prod, log_end, _ = cocycle_batch(x, z, [alpha], p.r, p.t, inverse=inverse)
    log_det = log_det_batch(x, z, [alpha], p.r, p.t, inverse=inverse)
    return CocycleProduct(prod[0, 0], float(log_end[0, 0]), k, direction, float(log_det[0, 0]))


@dataclass
class LyapunovEstimate:
    alpha: float
    gamma_hat: float
    std_error: float
    steps_per_run: int
    runs: int
    direction: str
    per_run: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))
    burn_in: int = DEFAULT_BURN_IN

    @property
    def gamma_per_site(self) -> float:
        return 0.5 * self.gamma_hat


def _run_phases(dist, seed, run, steps, direction):
    if direction == "forward":
        om = sample_phases(dist, seed, 0, 2 * steps, stream=run)
    else:
        om = sample_phases(dist, seed, -2 * steps, 0, stream=run)
    return _pair_phases(om, steps, direction)


def lyapunov_sweep(
    dist: PhaseDistribution,
    p: BandParameters,
    alphas,
    steps: int,
    runs: int,
    seed: int,
    direction: str = "forward",
    burn_in: int = DEFAULT_BURN_IN,
    backend: Optional[str] = None,
) -> list[LyapunovEstimate]:
    """Monte-Carlo Lyapunov exponents on a grid of spectral shifts.

    Run ``i`` uses phase stream ``i`` of ``seed``; every alpha sees the same
    phases, shifted.  Each run contributes log-growth per step measured after
    ``burn_in`` discarded steps.
    """
    if runs < 2:
        raise DomainError("need at least two runs for an error bar")
    if steps < 1:
        raise DomainError("steps must be positive")
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    total = steps + burn_in
    xs, zs = [], []
    for run in range(runs):
        even, odd = _run_phases(dist, seed, run, total, direction)
        xs.append(np.exp(1j * even))
        zs.append(np.exp(-1j * odd))
    _, log_end, log_burn = cocycle_batch(
        np.array(xs), np.array(zs), alphas, p.r, p.t, burn=burn_in,
        inverse=direction == "backward", backend=backend,
    )
    growth = (log_end - log_burn) / steps  # (runs, n_alpha)
    out = []
    for a, alpha in enumerate(alphas):
        g = growth[:, a]
        out.append(LyapunovEstimate(
            float(alpha), float(g.mean()), float(g.std(ddof=1) / math.sqrt(runs)),
            steps, runs, direction, g.copy(), burn_in,
        ))
    return out


def lyapunov_estimate(dist, p, alpha, steps, runs, seed, direction="forward", **kw) -> LyapunovEstimate:
    return lyapunov_sweep(dist, p, [alpha], steps, runs, seed, direction, **kw)[0]


@dataclass
class GeneralizedEigenvector:
    """Coefficients c_k for k = first, ..., first + len(coefficients) - 1."""

    coefficients: np.ndarray = field(repr=False)
    first: int
    alpha: float
    seed_data: tuple

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.first, self.first + len(self.coefficients))

    def __getitem__(self, k: int) -> complex:
        return complex(self.coefficients[k - self.first])


def build_generalized_eigenvector_full(
    omega: DisorderRealization,
    alpha: float,
    seed_pair: tuple[complex, complex],
    p: BandParameters,
    forward_steps: int,
    backward_steps: int,
) -> GeneralizedEigenvector:
    """Solve U psi = e^{i alpha} psi from (c_{-1}, c_0) by the transfer recursion.

    Covers sites -2*backward_steps - 1 ... 2*forward_steps.
    """
    cm1, c0 = seed_pair
    if cm1 == 0 and c0 == 0:
        raise DomainError("seed pair must be nonzero")
    fw = np.empty((forward_steps + 1, 2), dtype=complex)
    fw[0] = (cm1, c0)
    for k in range(forward_steps):
        fw[k + 1] = transfer_matrix(omega[2 * k] + alpha, omega[2 * k + 1] + alpha, p) @ fw[k]
    bw = np.empty((backward_steps + 1, 2), dtype=complex)
    bw[0] = (cm1, c0)
    for k in range(1, backward_steps + 1):
        T = transfer_matrix(omega[-2 * k] + alpha, omega[-2 * k + 1] + alpha, p)
        bw[k] = np.linalg.solve(T, bw[k - 1])
    # bw[k] holds (c_{-2k-1}, c_{-2k})
    coeffs = np.concatenate([bw[:0:-1].ravel(), fw.ravel()])
    return GeneralizedEigenvector(coeffs, -2 * backward_steps - 1, alpha, (cm1, c0))


def half_lattice_seed(omega: DisorderRealization, alpha: float, c0: complex, p: BandParameters):
    """(c_1, c_2) forced by the boundary rows of U+."""
    r, t = p.r, p.t
    th0, th1 = omega[0], omega[1]
    a = np.exp(-1j * (th1 + alpha)) + r * np.exp(-1j * (th1 - th0))
    c1 = c0 * a / t
    c2 = c0 * (a * r / t**2 - (r + np.exp(1j * (alpha + th0))) / t**2)
    return c1, c2


def build_generalized_eigenvector_half(
    omega: DisorderRealization, alpha: float, c0: complex, p: BandParameters, steps: int
) -> GeneralizedEigenvector:
    """Solve U+ psi = e^{i alpha} psi on sites 0 .. 2*steps from the free c_0."""
    if c0 == 0:
        raise DomainError("c0 must be nonzero")
    c = np.empty(2 * steps + 1, dtype=complex)
    c[0] = c0
    c[1], c[2] = half_lattice_seed(omega, alpha, c0, p)
    for k in range(1, steps):
        T = transfer_matrix(omega[2 * k] + alpha, omega[2 * k + 1] + alpha, p)
        c[2 * k + 1: 2 * k + 3] = T @ c[2 * k - 1: 2 * k + 1]
    return GeneralizedEigenvector(c, 0, alpha, (c0,))


class FitError(ValueError):
    pass


def decay_rate_fit(
    values,
    indices=None,
    center: Optional[int] = None,
    floor: float = 1e-300,
    relative_floor: bool = False,
    window: Optional[tuple[int, int]] = None,
    min_points: int = 20,
) -> tuple[float, float]:
    """Least-squares decay rate of ln|c_k| against |k - center|.

    Returns (rate per site, rms residual).  ``center`` defaults to the site of
    largest modulus; points below ``floor`` (times max|c| when
    ``relative_floor``) are dropped, as are indices outside ``window``.
    """
    if isinstance(values, GeneralizedEigenvector):
        indices = values.indices
        values = values.coefficients
    mag = np.abs(np.asarray(values))
    idx = np.arange(len(mag)) if indices is None else np.asarray(indices)
    if center is None:
        center = int(idx[np.argmax(mag)])
    cut = floor * mag.max() if relative_floor else floor
    keep = mag > cut
    if window is not None:
        keep &= (idx >= window[0]) & (idx <= window[1])
    if keep.sum() < min_points:
        raise FitError(f"only {int(keep.sum())} usable points, need {min_points}")
    x = np.abs(idx[keep] - center).astype(float)
    y = np.log(mag[keep])
    if np.ptp(x) == 0:
        raise FitError("all usable points at the same distance")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return float(-slope), float(np.sqrt(np.mean(resid**2)))
