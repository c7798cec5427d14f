"""Renormalized products of transfer matrices.

Both backends take per-run phase factors ``x = exp(i theta_even)`` and
``z = exp(-i theta_odd)`` (shape ``(runs, steps)``) and a grid of spectral
shifts, and return for every (run, alpha) pair the final Frobenius-normalized
2x2 product together with the accumulated log of the removed scale factors,
sampled once after ``burn`` steps and once at the end.
"""

import numpy as np

from . import _accel


def _cocycle_loops(x, z, alphas, r, t, burn, inverse):
    runs, steps = x.shape
    na = alphas.shape[0]
    prod = np.zeros((runs, na, 2, 2), dtype=np.complex128)
    log_end = np.zeros((runs, na))
    log_burn = np.zeros((runs, na))
    q = r / t
    q2 = q * q
    it2 = 1.0 / (t * t)
    for a in range(na):
        ea = np.exp(1j * alphas[a])
        for k in range(runs):
            p11 = 1.0 + 0j
            p12 = 0j
            p21 = 0j
            p22 = 1.0 + 0j
            acc = 0.0
            for j in range(steps):
                xa = x[k, j] * ea
                za = z[k, j] / ea
                xz = xa * za
                m11 = -za
                m12 = q * (xz - za)
                m21 = q * (1.0 - za)
                m22 = -xa * it2 + q2 * (xz + 1.0 - za)
                if inverse:
                    m11, m12, m21, m22 = m22 / xz, -m12 / xz, -m21 / xz, m11 / xz
                n11 = m11 * p11 + m12 * p21
                n12 = m11 * p12 + m12 * p22
                n21 = m21 * p11 + m22 * p21
                n22 = m21 * p12 + m22 * p22
                s = np.sqrt(
                    n11.real * n11.real + n11.imag * n11.imag
                    + n12.real * n12.real + n12.imag * n12.imag
                    + n21.real * n21.real + n21.imag * n21.imag
                    + n22.real * n22.real + n22.imag * n22.imag
                )
                acc += np.log(s)
                p11 = n11 / s
                p12 = n12 / s
                p21 = n21 / s
                p22 = n22 / s
                if j + 1 == burn:
                    log_burn[k, a] = acc
            prod[k, a, 0, 0] = p11
            prod[k, a, 0, 1] = p12
            prod[k, a, 1, 0] = p21
            prod[k, a, 1, 1] = p22
            log_end[k, a] = acc
    return prod, log_end, log_burn


_cocycle_numba = _accel.njit(_cocycle_loops)


def _cocycle_numpy(x, z, alphas, r, t, burn, inverse):
    runs, steps = x.shape
    na = alphas.shape[0]
    q = r / t
    q2 = q * q
    it2 = 1.0 / (t * t)
    ea = np.exp(1j * alphas)[None, :]
    P = np.zeros((runs, na, 2, 2), dtype=np.complex128)
    P[..., 0, 0] = P[..., 1, 1] = 1.0
    acc = np.zeros((runs, na))
    log_burn = np.zeros((runs, na))
    M = np.empty((runs, na, 2, 2), dtype=np.complex128)
    for j in range(steps):
        xa = x[:, j, None] * ea
        za = z[:, j, None] / ea
        xz = xa * za
        m11 = -za
        m12 = q * (xz - za)
        m21 = q * (1.0 - za)
        m22 = -xa * it2 + q2 * (xz + 1.0 - za)
        if inverse:
            m11, m12, m21, m22 = m22 / xz, -m12 / xz, -m21 / xz, m11 / xz
        M[..., 0, 0], M[..., 0, 1], M[..., 1, 0], M[..., 1, 1] = m11, m12, m21, m22
        P = M @ P
        s = np.sqrt((P.real ** 2 + P.imag ** 2).sum(axis=(-2, -1)))
        acc += np.log(s)
        P /= s[..., None, None]
        if j + 1 == burn:
            log_burn[:] = acc
    return P, acc, log_burn


def _log_det_loops(x, z, alphas, r, t, inverse):
    """log|det| of the product via Gram-Schmidt on its two columns.

    The renormalized product becomes numerically rank one after a few dozen
    steps, so its determinant cannot be read off; the sum of the logs of the
    two Gram-Schmidt scale factors is the log-determinant at full precision.
    """
    runs, steps = x.shape
    na = alphas.shape[0]
    out = np.zeros((runs, na))
    q = r / t
    q2 = q * q
    it2 = 1.0 / (t * t)
    for a in range(na):
        ea = np.exp(1j * alphas[a])
        for k in range(runs):
            u1 = 1.0 + 0j
            u2 = 0j
            v1 = 0j
            v2 = 1.0 + 0j
            acc = 0.0
            for j in range(steps):
                xa = x[k, j] * ea
                za = z[k, j] / ea
                xz = xa * za
                m11 = -za
                m12 = q * (xz - za)
                m21 = q * (1.0 - za)
                m22 = -xa * it2 + q2 * (xz + 1.0 - za)
                if inverse:
                    m11, m12, m21, m22 = m22 / xz, -m12 / xz, -m21 / xz, m11 / xz
                a1 = m11 * u1 + m12 * u2
                a2 = m21 * u1 + m22 * u2
                b1 = m11 * v1 + m12 * v2
                b2 = m21 * v1 + m22 * v2
                na_ = np.sqrt(abs(a1) ** 2 + abs(a2) ** 2)
                u1 = a1 / na_
                u2 = a2 / na_
                c = np.conj(u1) * b1 + np.conj(u2) * b2
                b1 = b1 - c * u1
                b2 = b2 - c * u2
                nb = np.sqrt(abs(b1) ** 2 + abs(b2) ** 2)
                v1 = b1 / nb
                v2 = b2 / nb
                acc += np.log(na_) + np.log(nb)
            out[k, a] = acc
    return out


_log_det_numba = _accel.njit(_log_det_loops)


def log_det_batch(x, z, alphas, r, t, inverse=False, backend=None):
    """log|det| of every (run, alpha) product; same inputs as ``cocycle_batch``."""
    x = np.ascontiguousarray(x, dtype=np.complex128)
    z = np.ascontiguousarray(z, dtype=np.complex128)
    alphas = np.ascontiguousarray(np.atleast_1d(alphas), dtype=np.float64)
    if x.ndim == 1:
        x, z = x[None, :], z[None, :]
    backend = backend or _accel.backend()
    fn = _log_det_numba if backend == "numba" else _log_det_loops
    return fn(x, z, alphas, float(r), float(t), bool(inverse))


def cocycle_batch(x, z, alphas, r, t, burn=0, inverse=False, backend=None):
    """Dispatch to the selected backend; see module docstring for shapes."""
    x = np.ascontiguousarray(x, dtype=np.complex128)
    z = np.ascontiguousarray(z, dtype=np.complex128)
    alphas = np.ascontiguousarray(np.atleast_1d(alphas), dtype=np.float64)
    if x.ndim == 1:
        x, z = x[None, :], z[None, :]
    backend = backend or _accel.backend()
    fn = _cocycle_numba if backend == "numba" else _cocycle_numpy
    return fn(x, z, alphas, float(r), float(t), int(burn), bool(inverse))
