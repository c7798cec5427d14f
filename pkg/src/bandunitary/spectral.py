"""Eigenanalysis of finite windows and localization diagnostics."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .circle import TWO_PI, ArcSet, wrap
from .disorder import DisorderRealization, DomainError, PhaseDistribution, sample_phases
from .operators import (
    BandParameters,
    BandUnitaryWindow,
    band_matvec,
    build_U_plus,
    build_U_window,
    to_banded,
)
from .transfer import FitError, decay_rate_fit, lyapunov_estimate

SpectrumArcSet = ArcSet

EDGE_SITES = 10
EDGE_MASS = 1e-6
RANK_THRESHOLD = 1e-8


class NonUnitaryError(ValueError):
    def __init__(self, defect: float):
        super().__init__(f"matrix is not unitary (defect {defect:.3e})")
        self.defect = defect


def spectrum_of_S(t: float) -> ArcSet:
    """Sigma(t): the arc of halfwidth arccos(1 - 2 t^2) around 1."""
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"t must lie in [0, 1], got {t}")
    return ArcSet.from_arcs([(0.0, math.acos(max(-1.0, 1.0 - 2.0 * t * t)))])


def almost_sure_spectrum(nu: PhaseDistribution, t: float) -> ArcSet:
    """exp(i supp nu) Sigma(t)."""
    return nu.support().rotated_union(spectrum_of_S(t))


@dataclass
class UnitaryEigenDecomposition:
    eigenphases: np.ndarray
    eigenvectors: np.ndarray = field(repr=False)
    residual: float
    offset: int = 0

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.exp(1j * self.eigenphases)


def eig_unitary(U, tol: float = 1e-10) -> UnitaryEigenDecomposition:
    """Complex Schur form of a unitary matrix; Schur vectors are eigenvectors.

    The Schur factor of a normal matrix is diagonal up to rounding, so its
    diagonal and the unitary Schur basis give an orthonormal eigensystem even
    for (near-)degenerate eigenvalues.
    """
    w = U if isinstance(U, BandUnitaryWindow) else None
    M = np.asarray(U.matrix if w is not None else U)
    n = len(M)
    defect = float(np.abs(M @ M.conj().T - np.eye(n)).max())
    if defect > tol:
        raise NonUnitaryError(defect)
    T, Z = scipy.linalg.schur(M, output="complex")
    lam = wrap(np.angle(np.diag(T)))
    order = np.argsort(lam, kind="stable")
    lam, Z = lam[order], Z[:, order]
    residual = float(np.linalg.norm(M @ Z - Z * np.exp(1j * lam)[None, :], axis=0).max())
    return UnitaryEigenDecomposition(lam, Z, residual, w.offset if w is not None else 0)


@dataclass
class SpectralMeasure:
    """Atoms (phases, weights) of <site|E(.)|site>."""

    phases: np.ndarray
    weights: np.ndarray
    site: int

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    def moment(self, n: int) -> complex:
        return complex(np.sum(self.weights * np.exp(1j * n * self.phases)))

    def moments(self, n_max: int) -> np.ndarray:
        n = np.arange(n_max + 1)[:, None]
        return (self.weights[None, :] * np.exp(1j * n * self.phases[None, :])).sum(axis=1)


def spectral_measure(dec: UnitaryEigenDecomposition, site: int) -> SpectralMeasure:
    i = site - dec.offset
    if not 0 <= i < len(dec.eigenphases):
        raise IndexError(f"site {site} outside the window")
    return SpectralMeasure(dec.eigenphases, np.abs(dec.eigenvectors[i]) ** 2, site)


def spectral_averaging_experiment(
    omega: DisorderRealization,
    grid: int,
    size: int,
    t: float,
    n_max: int = 10,
    site: int = 0,
) -> np.ndarray:
    """Moments of the site-0 spectral measure averaged over theta_0 on a grid.

    The phase at ``site`` is replaced by 2*pi*j/grid, j = 0..grid-1; all other
    phases come from ``omega``.  Returns the averaged moments for n = 0..n_max.
    """
    if grid < 64:
        raise DomainError("grid must have at least 64 points")
    p = BandParameters(t)
    offset = -2 * (size // 4)
    acc = np.zeros(n_max + 1, dtype=complex)
    for j in range(grid):
        om = omega.with_phase(site, TWO_PI * j / grid)
        dec = eig_unitary(build_U_window(p, om, size, offset))
        acc += spectral_measure(dec, site).moments(n_max)
    return acc / grid


def krylov_matrix(U: BandUnitaryWindow, sites: Sequence[int], span_order: int) -> np.ndarray:
    """Columns U^n |s> for n = -span_order..span_order and every s in sites."""
    step_f, step_b = _krylov_steppers(U)
    cols = []
    for s in sites:
        e = U.unit(s)
        cols.append(e)
        v, w = e, e
        for _ in range(span_order):
            v, w = step_f(v), step_b(w)
            cols.extend((v, w))
    return np.array(cols).T


def _krylov_steppers(U: BandUnitaryWindow):
    if U.boundary == "wrap":
        return (lambda v: U.matrix @ v), (lambda v: U.matrix.conj().T @ v)
    fwd = to_banded(U)
    bwd = to_banded(BandUnitaryWindow(U.matrix.conj().T, U.offset, U.flavor, U.params))
    return (lambda v: band_matvec(fwd, v)), (lambda v: band_matvec(bwd, v))


def _orthonormal_krylov(U, sites, span_order, threshold):
    """Grow an orthonormal basis of span{U^n |s>} two-sidedly.

    Each chain applies U (or U*) to its own last accepted direction, so the
    span after n steps equals that of the raw powers, but the basis never
    becomes ill-conditioned.  A candidate is kept when its norm after two
    rounds of Gram-Schmidt exceeds ``threshold``.
    """
    step_f, step_b = _krylov_steppers(U)
    Q = np.zeros((U.size, U.size), dtype=complex)
    kept = 0
    residuals = []

    def accept(v):
        nonlocal kept
        for _ in range(2):
            v = v - Q[:, :kept] @ (Q[:, :kept].conj().T @ v)
        nv = float(np.linalg.norm(v))
        residuals.append(nv)
        if nv <= threshold or kept == U.size:
            return None
        Q[:, kept] = v / nv
        kept += 1
        return Q[:, kept - 1]

    chains = []
    for s in sites:
        q = accept(U.unit(s))
        if q is not None:
            chains.append([q, q])
    for _ in range(span_order):
        for ch in chains:
            for side, step in ((0, step_f), (1, step_b)):
                if ch[side] is not None:
                    ch[side] = accept(step(ch[side]))
    return kept, np.array(residuals)


def krylov_cyclicity(
    U: BandUnitaryWindow,
    sites: Sequence[int],
    span_order: int,
    threshold: float = RANK_THRESHOLD,
    method: str = "svd",
) -> tuple[int, np.ndarray]:
    """Numerical Krylov rank and its profile.

    ``svd``: singular values of the raw power matrix above threshold * largest.
    The raw columns are graded (the k-th new direction enters with weight of
    order t^k), so at moderate t this undercounts the true dimension.
    ``arnoldi``: number of accepted directions of an orthonormal two-sided
    Krylov basis; the profile holds the residual norm of every candidate.
    """
    if method == "svd":
        s = np.linalg.svd(krylov_matrix(U, sites, span_order), compute_uv=False)
        return int((s > threshold * s[0]).sum()), s
    if method == "arnoldi":
        return _orthonormal_krylov(U, sites, span_order, threshold)
    raise DomainError(f"unknown method {method!r}")


def participation_ratio(vectors: np.ndarray) -> np.ndarray:
    """1 / sum |c_k|^4 per (normalized) column."""
    p = np.abs(vectors) ** 2
    p /= p.sum(axis=0, keepdims=True)
    return 1.0 / (p**2).sum(axis=0)


def edge_mass(vectors: np.ndarray, edge: int = EDGE_SITES) -> np.ndarray:
    p = np.abs(vectors) ** 2
    return p[:edge].sum(axis=0) + p[-edge:].sum(axis=0)


def eigenvector_decay_rates(dec: UnitaryEigenDecomposition, floor: float = 1e-10, min_points: int = 20):
    """Per-site decay rate of every eigenvector (nan when the fit is refused).

    Points below ``floor`` times the peak modulus are dropped: dense solvers
    resolve eigenvector components only down to roughly that level.
    """
    sites = np.arange(len(dec.eigenphases))
    rates = np.full(len(sites), np.nan)
    for j in range(len(sites)):
        try:
            rates[j], _ = decay_rate_fit(
                dec.eigenvectors[:, j], sites, floor=floor, relative_floor=True, min_points=min_points
            )
        except FitError:
            pass
    return rates


def _realization_stats(dist, p, size, seed, index, sigma, eps, floor):
    offset = -2 * (size // 4)
    om = sample_phases(dist, seed, offset, offset + size, stream=index)
    dec = eig_unitary(build_U_window(p, om, size, offset))
    V = dec.eigenvectors
    insulated = edge_mass(V) < EDGE_MASS
    rates = eigenvector_decay_rates(dec, floor)
    dist_out = sigma.distance(dec.eigenphases)
    return {
        "realization": index,
        "eigenphases": dec.eigenphases,
        "residual": dec.residual,
        "insulated": insulated,
        "decay_rates": rates,
        "participation": participation_ratio(V),
        "distance_to_sigma": dist_out,
        "inside_fraction": float(np.mean(dist_out[insulated] <= eps)) if insulated.any() else float("nan"),
    }


def _summary(stats, mask_key):
    rates, prs, dists = [], [], []
    for s in stats:
        m = s["insulated"] if mask_key == "insulated" else np.ones_like(s["insulated"])
        rates.append(s["decay_rates"][m])
        prs.append(s["participation"][m])
        dists.append(s["distance_to_sigma"][m])
    rates, prs, dists = (np.concatenate(x) if x else np.zeros(0) for x in (rates, prs, dists))
    finite = rates[np.isfinite(rates)]
    n = len(prs)
    return {
        "count": int(n),
        "median_decay_rate": float(np.median(finite)) if len(finite) else float("nan"),
        "fitted": int(len(finite)),
        "mean_participation": float(prs.mean()) if n else float("nan"),
        "participation_stderr": float(prs.std(ddof=1) / math.sqrt(n)) if n > 1 else float("nan"),
        "median_participation": float(np.median(prs)) if n else float("nan"),
        "distance_q99": float(np.quantile(dists, 0.99)) if n else float("nan"),
        "distances": dists,
    }


def localization_report(
    dist: PhaseDistribution,
    t: float,
    window: int,
    realizations: int,
    seed: int,
    eps: float = 0.05,
    lyapunov_steps: int = 20000,
    lyapunov_runs: int = 16,
    histogram_bins: int = 64,
    floor: float = 1e-10,
    jobs: int = 1,
) -> dict:
    """Eigendecompose independent windows and collect localization evidence.

    Aggregates are given over all eigenvectors and over the boundary-insulated
    ones (less than 1e-6 of their mass on the 10 outermost sites per edge).
    The tolerance bands used to judge these numbers are calibration choices.
    """
    p = BandParameters(t)
    sigma = almost_sure_spectrum(dist, t)
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as ex:
        stats = list(ex.map(
            lambda i: _realization_stats(dist, p, window, seed, i, sigma, eps, floor),
            range(realizations),
        ))
    lyap = lyapunov_estimate(dist, p, 0.0, lyapunov_steps, lyapunov_runs, seed)
    all_phases = np.concatenate([s["eigenphases"] for s in stats])
    counts, edges = np.histogram(all_phases, bins=histogram_bins, range=(0.0, TWO_PI))
    summary = {k: _summary(stats, k) for k in ("all", "insulated")}
    ins = summary["insulated"]
    inside = np.concatenate([s["distance_to_sigma"][s["insulated"]] for s in stats]) <= eps
    return {
        "t": t,
        "nu": dist.spec_string(),
        "window": window,
        "realizations": realizations,
        "seed": seed,
        "eps": eps,
        "sigma": sigma.to_json(),
        "gamma_hat": lyap.gamma_hat,
        "gamma_stderr": lyap.std_error,
        "gamma_per_site": lyap.gamma_per_site,
        "inside_fraction": float(inside.mean()) if inside.size else float("nan"),
        "decay_to_lyapunov_ratio": ins["median_decay_rate"] / lyap.gamma_per_site
        if lyap.gamma_per_site > 0 else float("nan"),
        "summary": summary,
        "per_realization": stats,
        "histogram": {"bin_center": 0.5 * (edges[1:] + edges[:-1]), "count": counts},
        "calibrated": ["eps", "edge filter", "decay fit floor"],
    }
