"""Real 4x4 lift of the transfer matrices and the non-compactness witness.

``tau`` sends a complex 2x2 matrix to the real 4x4 matrix whose 2x2 blocks
are Re(a) I + Im(a) J with J = [[0, 1], [-1, 0]].  For theta != eta the
group generated by T(theta, theta), T(eta, eta), T(theta, eta), T(eta, theta)
contains the positive definite K = J^-1 L with trace > 2, so it cannot be
compact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .circle import circular_distance
from .disorder import DomainError
from .operators import BandParameters
from .transfer import transfer_matrix, transfer_matrix_dtheta

I2 = np.eye(2)
J2 = np.array([[0.0, 1.0], [-1.0, 0.0]])


def tau_lift(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    return np.block([[m[i, j].real * I2 + m[i, j].imag * J2 for j in range(2)] for i in range(2)])


def is_lift(R: np.ndarray, tol: float = 0.0) -> bool:
    """True when every 2x2 block of R has the form a I + b J."""
    for i in range(2):
        for j in range(2):
            b = R[2 * i: 2 * i + 2, 2 * j: 2 * j + 2]
            if abs(b[0, 0] - b[1, 1]) > tol or abs(b[0, 1] + b[1, 0]) > tol:
                return False
    return True


def structure_matrices(p: BandParameters) -> dict[str, np.ndarray]:
    """A0..A2 with tau(T(th, th)) = A0 + A1 sin th + A2 cos th, and B0..B2 with
    d/dth tau(T(th, eta))|_{eta = th} = B0 + B1 sin th + B2 cos th."""
    r, t = p.r, p.t
    q = r / t
    A0 = np.array([
        [0, 0, q, 0],
        [0, 0, 0, q],
        [q, 0, 2 * q * q, 0],
        [0, q, 0, 2 * q * q],
    ])
    A1 = np.array([
        [0, 1, 0, q],
        [-1, 0, -q, 0],
        [0, q, 0, -1],
        [-q, 0, 1, 0],
    ])
    A2 = -(A0 + np.eye(4))
    B0 = np.array([
        [0, 0, 0, q],
        [0, 0, -q, 0],
        [0, 0, 0, q * q],
        [0, 0, -q * q, 0],
    ])
    B1 = np.diag([0, 0, 1 / t**2, 1 / t**2])
    B2 = np.array([
        [0, 0, 0, 0],
        [0, 0, 0, 0],
        [0, 0, 0, -1 / t**2],
        [0, 0, 1 / t**2, 0],
    ])
    return {"A0": A0, "A1": A1, "A2": A2, "B0": B0, "B1": B1, "B2": B2}


def structure_defects(p: BandParameters, theta, h: float = 1e-6) -> dict[str, float]:
    """Max deviation of both expansions over the given thetas.

    ``eqdiag2_fd`` uses a central difference with step h; ``eqdiag2_exact``
    the analytic derivative.
    """
    S = structure_matrices(p)
    d1 = d2 = d3 = 0.0
    for th in np.atleast_1d(theta):
        s, c = np.sin(th), np.cos(th)
        lhs = tau_lift(transfer_matrix(th, th, p))
        d1 = max(d1, np.abs(lhs - (S["A0"] + S["A1"] * s + S["A2"] * c)).max())
        rhs = S["B0"] + S["B1"] * s + S["B2"] * c
        fd = (tau_lift(transfer_matrix(th + h, th, p)) - tau_lift(transfer_matrix(th - h, th, p))) / (2 * h)
        d2 = max(d2, np.abs(fd - rhs).max())
        d3 = max(d3, np.abs(tau_lift(transfer_matrix_dtheta(th, th, p)) - rhs).max())
    return {"eqdiag1": float(d1), "eqdiag2_fd": float(d2), "eqdiag2_exact": float(d3)}


def _rel(a, b) -> float:
    return float(np.abs(a - b).max() / max(1.0, np.abs(b).max()))


@dataclass
class FuerstenbergCertificate:
    p: BandParameters
    theta: float
    eta: float
    elements: dict[str, np.ndarray] = field(repr=False)
    structure: dict[str, np.ndarray] = field(repr=False)
    trace_K: float
    trace_excess: float
    max_eigenvalue_K: float
    identity_defects: dict[str, float]

    @property
    def noncompact_witnessed(self) -> bool:
        return self.trace_K > 2.0 and self.max_eigenvalue_K > 1.0

    def to_json(self) -> str:
        K = self.elements["K"]
        ev = np.linalg.eigvalsh(0.5 * (K + K.conj().T))
        doc = {
            "t": self.p.t,
            "r": self.p.r,
            "theta": self.theta,
            "eta": self.eta,
            "trace_K": self.trace_K,
            "trace_K_closed_form": 2.0 + self.trace_excess,
            "trace_excess": self.trace_excess,
            "eigenvalues_K": [float(x) for x in ev],
            "max_eigenvalue_K": self.max_eigenvalue_K,
            "defects": self.identity_defects,
            "noncompact_witnessed": self.noncompact_witnessed,
        }
        return json.dumps(doc, indent=2, default=lambda x: float(x))


def closed_form_elements(theta: float, eta: float, p: BandParameters) -> dict[str, np.ndarray]:
    """C, E, L, J written in x = e^{-i theta}, z = e^{-i eta}."""
    q = p.r / p.t
    w = np.exp(-1j * (theta - eta))  # x * conj(z)
    wb = np.conj(w)
    a = abs(w - 1.0) ** 2
    return {
        "C": np.array([[w, 0.0], [q * (w - 1.0), 1.0]]),
        "E": np.array([[1.0, q * (1.0 - wb)], [0.0, wb]]),
        "L": np.array([[w, q * (w - 1.0)], [q * (w - 1.0), wb - q * q * a]]),
        "J": np.array([[w - q * q * a, q * (1.0 - wb)], [q * (1.0 - wb), wb]]),
    }


def trace_excess(theta: float, eta: float, p: BandParameters) -> float:
    """tr K - 2 = (r^2 / t^4) |x conj(z) - 1|^4, with |e^{-id} - 1| = 2|sin(d/2)|."""
    chord = 2.0 * abs(np.sin(0.5 * (theta - eta)))
    return p.r**2 / p.t**4 * chord**4


def group_elements(theta: float, eta: float, p: BandParameters) -> FuerstenbergCertificate:
    T = lambda a, b: transfer_matrix(a, b, p)  # noqa: E731
    inv = np.linalg.inv
    prod = {}
    prod["C"] = T(theta, theta) @ inv(T(theta, eta))
    prod["E"] = inv(T(eta, theta)) @ T(theta, theta)
    prod["L"] = prod["C"] @ prod["E"]
    prod["J"] = prod["E"] @ prod["C"]
    closed = closed_form_elements(theta, eta, p)
    defects = {f"{k}_closed_vs_product": _rel(prod[k], closed[k]) for k in closed}
    L, J = closed["L"], closed["J"]
    K = inv(J) @ L
    defects["det_L"] = float(abs(np.linalg.det(L) - 1.0))
    defects["det_J"] = float(abs(np.linalg.det(J) - 1.0))
    defects["J_inverse_vs_L_adjoint"] = _rel(inv(J), L.conj().T)
    defects["K_selfadjoint"] = _rel(K, K.conj().T)
    # rounding in ad - bc scales with |ad| + |bc|, which grows like (r/t^2)^4
    defects["det_K"] = float(abs(np.linalg.det(K) - 1.0) / max(1.0, abs(K[0, 0] * K[1, 1]) + abs(K[0, 1] * K[1, 0])))
    excess = trace_excess(theta, eta, p)
    tr = float(np.trace(K).real)
    defects["trace_K_formula"] = abs(tr - (2.0 + excess)) / max(1.0, 2.0 + excess)
    ev = np.linalg.eigvalsh(0.5 * (K + K.conj().T))
    defects["K_min_eigenvalue"] = float(ev[0])
    elements = dict(closed, K=K, **{f"{k}_product": v for k, v in prod.items()})
    return FuerstenbergCertificate(
        p, float(theta), float(eta), elements, structure_matrices(p), tr, excess, float(ev[-1]), defects
    )


def noncompactness_probe(theta: float, eta: float, p: BandParameters, powers: int) -> float:
    """||K^n||^(1/n) in the spectral norm; exceeds 1 iff theta != eta."""
    if circular_distance(theta, eta) == 0.0:
        raise DomainError("theta == eta gives K = identity; nothing to witness")
    if powers < 1:
        raise DomainError("powers must be positive")
    K = group_elements(theta, eta, p).elements["K"]
    Kn = np.linalg.matrix_power(K, powers)
    return float(np.linalg.norm(Kn, 2) ** (1.0 / powers))
