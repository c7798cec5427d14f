"""Finite dense windows of the band unitaries S, U = D S, S+, U+ and CMV matrices.

The full-lattice S factors as S = A B with A the direct sum of
[[r, t], [-t, r]] over site pairs (2k, 2k+1) and B the direct sum of
[[r, -t], [t, r]] over pairs (2k-1, 2k).  Columns of S therefore read

    even column 2k:  rows 2k-2..2k+1 = (-t^2, -rt, r^2, -rt)
    odd column 2k+1: rows 2k..2k+3   = (rt, r^2, rt, -t^2)

which fixes the anchor <2k-2|S|2k> = -t^2.  A window cut at an even lattice
offset only truncates the two B blocks straddling its edges; replacing each
by a unit-modulus scalar keeps the window exactly unitary and changes only
the first and last column.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .circle import wrap
from .disorder import DisorderRealization, DomainError, VerblunskiPhaseSequence

FLAVORS = ("S-full", "U-full", "S-plus", "U-plus", "CMV", "D-diagonal")


class ConstructionError(RuntimeError):
    """A built window failed its unitarity check."""


@dataclass(frozen=True)
class BandParameters:
    t: float

    def __post_init__(self):
        if not 0.0 < self.t < 1.0:
            raise DomainError(f"t must lie in (0, 1), got {self.t}")

    @property
    def r(self) -> float:
        return math.sqrt(1.0 - self.t * self.t)


def unitarity_tolerance(size: int) -> float:
    return 1e-12 if size <= 500 else 1e-10


def unitarity_defect(m: np.ndarray) -> float:
    return float(np.abs(m @ m.conj().T - np.eye(len(m))).max())


@dataclass(frozen=True)
class BandUnitaryWindow:
    """Dense window; row/column i is lattice site ``offset + i``."""

    matrix: np.ndarray = field(repr=False)
    offset: int
    flavor: str
    params: Optional[BandParameters]
    phases: Optional[DisorderRealization] = field(default=None, repr=False)
    boundary: str = "scalar-completion"

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.offset, self.offset + self.size)

    def index(self, site: int) -> int:
        i = site - self.offset
        if not 0 <= i < self.size:
            raise IndexError(f"site {site} outside window [{self.offset}, {self.offset + self.size})")
        return i

    def unit(self, site: int) -> np.ndarray:
        e = np.zeros(self.size, dtype=complex)
        e[self.index(site)] = 1.0
        return e

    def defect(self) -> float:
        return unitarity_defect(self.matrix)


def _checked(w: BandUnitaryWindow) -> BandUnitaryWindow:
    d = w.defect()
    if d > unitarity_tolerance(w.size):
        raise ConstructionError(f"{w.flavor} window of size {w.size} not unitary: defect {d:.3e}")
    w.matrix.setflags(write=False)
    return w


def _check_size(size: int):
    if size < 4 or size % 2:
        raise DomainError(f"window size must be even and >= 4, got {size}")


def _fill_interior(m: np.ndarray, r: float, t: float, cols, wrap_rows: bool):
    n = len(m)
    even = (-t * t, -r * t, r * r, -r * t)
    odd = (r * t, r * r, r * t, -t * t)
    for j in cols:
        first, vals = (j - 2, even) if j % 2 == 0 else (j - 1, odd)
        for d, v in enumerate(vals):
            i = first + d
            if wrap_rows:
                i %= n
            m[i, j] = v


def build_S_window(
    p: BandParameters,
    size: int,
    offset: int = 0,
    boundary: str = "scalar-completion",
    edge_phases: tuple[complex, complex] = (1.0, 1.0),
) -> BandUnitaryWindow:
    """Window of S(t) on sites offset..offset+size-1 (offset even).

    ``scalar-completion`` closes the two cut B blocks with the scalars in
    ``edge_phases``; ``wrap`` closes the window periodically.
    """
    _check_size(size)
    if offset % 2:
        raise DomainError("S windows must start at an even lattice site")
    r, t = p.r, p.t
    m = np.zeros((size, size), dtype=complex)
    if boundary == "wrap":
        _fill_interior(m, r, t, range(size), wrap_rows=True)
    elif boundary == "scalar-completion":
        _fill_interior(m, r, t, range(1, size - 1), wrap_rows=False)
        left, right = edge_phases
        m[0, 0], m[1, 0] = left * r, -left * t
        m[size - 2, size - 1], m[size - 1, size - 1] = right * t, right * r
    else:
        raise DomainError(f"unknown boundary mode {boundary!r}")
    return _checked(BandUnitaryWindow(m, offset, "S-full", p, boundary=boundary))


def build_S_plus(p: BandParameters, size: int, right_phase: complex = 1.0) -> BandUnitaryWindow:
    """Window of the half-lattice S+ on sites 0..size-1.

    Column 0 is (-r, t); the far edge uses the same scalar completion as the
    full-lattice window.
    """
    _check_size(size)
    r, t = p.r, p.t
    m = np.zeros((size, size), dtype=complex)
    _fill_interior(m, r, t, range(1, size - 1), wrap_rows=False)
    m[0, 0], m[1, 0] = -r, t
    m[size - 2, size - 1], m[size - 1, size - 1] = right_phase * t, right_phase * r
    return _checked(BandUnitaryWindow(m, 0, "S-plus", p))


def build_diagonal(omega: DisorderRealization, size: int, offset: int = 0) -> BandUnitaryWindow:
    """D = diag(exp(-i theta_k)) alone (the t -> 0 limit of U)."""
    theta = omega.window(offset, offset + size)
    m = np.diag(np.exp(-1j * theta))
    return _checked(BandUnitaryWindow(m, offset, "D-diagonal", None, omega))


def apply_phases(
    base: BandUnitaryWindow, omega: DisorderRealization, alpha: float = 0.0
) -> BandUnitaryWindow:
    """diag(exp(-i(theta_k + alpha))) @ base over the window's sites."""
    theta = omega.window(base.offset, base.offset + base.size)
    m = np.exp(-1j * (theta + alpha))[:, None] * base.matrix
    flavor = {"S-full": "U-full", "S-plus": "U-plus"}.get(base.flavor, base.flavor)
    return _checked(BandUnitaryWindow(m, base.offset, flavor, base.params, omega, base.boundary))


def build_U_window(
    p: BandParameters, omega: DisorderRealization, size: int, offset: int = 0, **kw
) -> BandUnitaryWindow:
    return apply_phases(build_S_window(p, size, offset, **kw), omega)


def build_U_plus(p: BandParameters, omega: DisorderRealization, size: int, **kw) -> BandUnitaryWindow:
    return apply_phases(build_S_plus(p, size, **kw), omega)


def _theta_block(a: complex, rho: float) -> np.ndarray:
    return np.array([[np.conj(a), rho], [rho, -a]])


def build_cmv(
    v: VerblunskiPhaseSequence, size: int, edge_phase: Optional[complex] = None
) -> BandUnitaryWindow:
    """CMV matrix C = L M for alpha_k = r exp(i eta_k), truncated to size x size.

    L is the direct sum of Theta_0, Theta_2, ...; M is 1 + Theta_1 + Theta_3 + ...
    with the cut block at the far edge replaced by ``edge_phase``.  The default
    exp(-i eta_{size-1}) is the usual unit-modulus truncation; it is also the
    choice under which B^-1 C B equals -U+ (right scalar +1) on every row.
    """
    _check_size(size)
    if len(v.etas) < size:
        raise IndexError(f"need {size} Verblunski phases, have {len(v.etas)}")
    a = v.coefficients
    rho = math.sqrt(1.0 - v.r * v.r)
    L = np.zeros((size, size), dtype=complex)
    M = np.zeros((size, size), dtype=complex)
    for k in range(0, size, 2):
        L[k:k + 2, k:k + 2] = _theta_block(a[k], rho)
    M[0, 0] = 1.0
    for k in range(1, size - 1, 2):
        M[k:k + 2, k:k + 2] = _theta_block(a[k], rho)
    M[size - 1, size - 1] = np.exp(-1j * v.etas[size - 1]) if edge_phase is None else edge_phase
    return _checked(BandUnitaryWindow(L @ M, 0, "CMV", BandParameters(rho)))


@dataclass(frozen=True)
class BasisChange:
    """B|j> = exp(i beta_j)|j> turning the CMV matrix into -U+."""

    betas: np.ndarray = field(repr=False)
    beta0: float

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(np.exp(1j * self.betas))


def build_basis_change(theta, beta0: float, size: int) -> BasisChange:
    """Betas from the recursion

        beta_1 - beta_0 = theta_1 + pi
        beta_{2k+1} - beta_{2k-1} = theta_{2k+1}
        beta_{2k+2} - beta_{2k} = -theta_{2k}
    """
    theta = np.asarray(theta, dtype=float)
    if len(theta) < size:
        raise IndexError(f"need {size} phases, have {len(theta)}")
    b = np.empty(size)
    b[0] = beta0
    if size > 1:
        b[1] = beta0 + theta[1] + np.pi
    for j in range(2, size):
        b[j] = b[j - 2] + (theta[j] if j % 2 else -theta[j - 2])
    return BasisChange(wrap(b), beta0)


def basis_change_closed_form(theta, beta0: float, size: int) -> np.ndarray:
    """Closed form of the same betas:

        beta_{2k+1} = theta_{2k+1} + theta_{2k-1} + ... + theta_1 + beta_0 + pi
        beta_{2k+2} = beta_0 - (theta_{2k} + theta_{2k-2} + ... + theta_0)
    """
    theta = np.asarray(theta, dtype=float)[:size]
    b = np.empty(size)
    b[0::2] = beta0 - np.concatenate([[0.0], np.cumsum(theta[0::2])])[: len(b[0::2])]
    b[1::2] = beta0 + np.pi + np.cumsum(theta[1::2])[: len(b[1::2])]
    return wrap(b)


def cmv_conjugation_check(v: VerblunskiPhaseSequence, beta0: float, size: int, edge_rows: int = 2) -> float:
    """max |B^-1 C B + U+| over rows 0..size-edge_rows-1.

    U+ is built from the phases theta_k = eta_k - eta_{k-1}.
    """
    theta = v.thetas()[:size]
    C = build_cmv(v, size).matrix
    beta = build_basis_change(theta, beta0, size).betas
    conj = np.exp(-1j * beta)[:, None] * C * np.exp(1j * beta)[None, :]
    omega = DisorderRealization(0, 0, theta)
    U = build_U_plus(BandParameters(math.sqrt(1.0 - v.r * v.r)), omega, size).matrix
    return float(np.abs(conj + U)[: size - edge_rows].max())


def cyclicity_identity_check(U: BandUnitaryWindow) -> dict[str, float]:
    """Residuals of the vector identities behind cyclicity of span{|-1>, |0>}.

    For a U-full window these are the expansions of U|-1>, U|0>, U^-1|0>,
    U^-1|-1> and the two reconstructions of |1> and |-2>.  For a U-plus window
    the single identity |1> = e^{i theta_1}/t (U|0> + r e^{-i theta_0}|0>).
    """
    if U.phases is None or U.params is None:
        raise DomainError("cyclicity identities need a phased U window")
    r, t = U.params.r, U.params.t
    th = U.phases
    e = U.unit
    M = U.matrix
    Mi = M.conj().T
    E = lambda k: np.exp(-1j * th[k])  # noqa: E731
    out = {}
    if U.flavor == "U-plus":
        if U.size < 6:
            raise DomainError("window too small")
        lhs = e(1)
        rhs = np.exp(1j * th[1]) / t * (M @ e(0) + r * np.exp(-1j * th[0]) * e(0))
        out["half_lattice_|1>"] = float(np.abs(lhs - rhs).max())
        return out
    if U.flavor != "U-full":
        raise DomainError(f"unsupported flavor {U.flavor}")
    if U.offset > -6 or U.offset + U.size < 6:
        raise DomainError("window must cover sites -6..5 for interior identities")
    Um1, U0 = M @ e(-1), M @ e(0)
    exp = {
        "U|-1>": E(-2) * r * t * e(-2) + E(-1) * r * r * e(-1) + E(0) * r * t * e(0) - E(1) * t * t * e(1),
        "U|0>": -E(-2) * t * t * e(-2) - E(-1) * r * t * e(-1) + E(0) * r * r * e(0) - E(1) * r * t * e(1),
        "U^-1|0>": np.exp(1j * th[0]) * (r * t * e(-1) + r * r * e(0) + r * t * e(1) - t * t * e(2)),
        "U^-1|-1>": np.exp(1j * th[-1]) * (-t * t * e(-3) - r * t * e(-2) + r * r * e(-1) - r * t * e(0)),
    }
    got = {"U|-1>": Um1, "U|0>": U0, "U^-1|0>": Mi @ e(0), "U^-1|-1>": Mi @ e(-1)}
    for k in exp:
        out[k] = float(np.abs(got[k] - exp[k]).max())
    up = np.exp(1j * th[1]) / t * (np.exp(-1j * th[0]) * r * e(0) - (t * Um1 + r * U0))
    upp = np.exp(1j * th[-2]) / t * (r * Um1 - t * U0 - np.exp(-1j * th[-1]) * r * e(-1))
    out["|1>"] = float(np.abs(up - e(1)).max())
    out["|-2>"] = float(np.abs(upp - e(-2)).max())
    return out


def to_banded(w: BandUnitaryWindow) -> np.ndarray:
    """Diagonals -2..2 as a (5, n) array, ``band[d + 2, j] = M[j - d, j]``."""
    n = w.size
    band = np.zeros((5, n), dtype=complex)
    for d in range(-2, 3):
        diag = np.diagonal(w.matrix, -d)
        if d >= 0:
            band[d + 2, : n - d] = diag
        else:
            band[d + 2, -d:] = diag
    return band


def band_matvec(band: np.ndarray, x: np.ndarray) -> np.ndarray:
    """y = M x for M stored by ``to_banded`` (non-periodic windows only)."""
    n = band.shape[1]
    y = np.zeros(n, dtype=complex)
    for d in range(-2, 3):
        if d >= 0:
            y[d:] += band[d + 2, : n - d] * x[: n - d]
        else:
            y[: n + d] += band[d + 2, -d:] * x[-d:]
    return y


def dump_window(w: BandUnitaryWindow, seed: Optional[int] = None) -> tuple[str, str]:
    """(json header, csv body) with 17 significant digits, nonzero entries only."""
    header = json.dumps({
        "flavor": w.flavor,
        "size": w.size,
        "offset": w.offset,
        "t": None if w.params is None else w.params.t,
        "seed": seed if seed is not None else (w.phases.seed if w.phases is not None else None),
    })
    rows = ["row,col,re,im"]
    ii, jj = np.nonzero(w.matrix)
    for i, j in zip(ii, jj):
        z = w.matrix[i, j]
        rows.append(f"{i},{j},{z.real:.17g},{z.imag:.17g}")
    return header, "\n".join(rows) + "\n"


def load_window(header: str, body: str) -> np.ndarray:
    h = json.loads(header)
    m = np.zeros((h["size"], h["size"]), dtype=complex)
    for line in body.strip().splitlines()[1:]:
        i, j, re, im = line.split(",")
        m[int(i), int(j)] = complex(float(re), float(im))
    return m
