r"""Spherical and scaled solid harmonics.

Surface harmonics use the Condon-Shortley-free orthonormal convention

.. math::

    Y_n^m(\theta, \phi) = \sqrt{\frac{2n+1}{4\pi}\frac{(n-|m|)!}{(n+|m|)!}}
        P_n^{|m|}(\cos\theta) e^{im\phi},

so ``Y_n^{-m} = conj(Y_n^m)``.

Internally, translations work with *scaled* solid harmonics

.. math::

    R_n^m(x) = (-i)^{|m|} \frac{r^n P_n^{|m|}(\cos\theta) e^{im\phi}}{(n+|m|)!},
    \qquad
    I_n^m(x) = (-i)^{|m|} \frac{(n-|m|)! P_n^{|m|}(\cos\theta) e^{im\phi}}{r^{n+1}},

for which ``1/|x-y| = sum conj(R_n^m(y)) I_n^m(x)`` (``|y| < |x|``) and the
addition theorems carry no extra normalization factors. Both are computed
from Cartesian recurrences, so no trigonometric calls are needed in hot loops.

Coefficient tables are stored flat, n-major: ``(n, m) -> n*n + n + m``.
"""
from functools import lru_cache
from math import lgamma

import numpy as np

from .._jit import njit, pick


def idx(n, m):
    return n * n + n + m


def ncoeffs(p):
    return (p + 1) ** 2


@lru_cache(maxsize=None)
def nm_table(p):
    """Arrays ``(n, m)`` of length ``(p+1)^2`` in flat order."""
    n = np.concatenate([np.full(2 * k + 1, k) for k in range(p + 1)])
    m = np.concatenate([np.arange(-k, k + 1) for k in range(p + 1)])
    n.flags.writeable = False
    m.flags.writeable = False
    return n, m


def ynorm(n, m):
    m = abs(m)
    return np.sqrt((2 * n + 1) / (4 * np.pi) * np.exp(lgamma(n - m + 1) - lgamma(n + m + 1)))


# {{{ surface harmonics

def _normalized_legendre(p, x):
    """Fully normalized ``Pbar[n, m](x)`` for ``0 <= m <= n <= p`` (includes 1/sqrt(4 pi)).

    ``x`` may be an array; result has shape ``(p+1, p+1) + x.shape``.
    """
    x = np.asarray(x, dtype=np.float64)
    s = np.sqrt(np.maximum(0.0, 1.0 - x * x))
    out = np.zeros((p + 1, p + 1) + x.shape)
    out[0, 0] = 1.0 / np.sqrt(4 * np.pi)
    for m in range(1, p + 1):
        out[m, m] = np.sqrt((2 * m + 1) / (2.0 * m)) * s * out[m - 1, m - 1]
    for m in range(0, p):
        out[m + 1, m] = np.sqrt(2 * m + 3.0) * x * out[m, m]
    for m in range(0, p + 1):
        for n in range(m + 2, p + 1):
            a = np.sqrt((4.0 * n * n - 1) / (n * n - m * m))
            b = np.sqrt(((n - 1.0) ** 2 - m * m) / (4.0 * (n - 1) ** 2 - 1))
            out[n, m] = a * (x * out[n - 1, m] - b * out[n - 2, m])
    return out


def sph_harm(n, m, theta, phi):
    """Orthonormal surface harmonic ``Y_n^m(theta, phi)`` (polar ``theta``)."""
    if n < 0 or abs(m) > n:
        raise ValueError(f"need |m| <= n, got n={n}, m={m}")
    theta = np.asarray(theta, dtype=np.float64)
    if np.any((theta < 0) | (theta > np.pi)):
        raise ValueError("polar angle outside [0, pi]")
    pbar = _normalized_legendre(n, np.cos(theta))[n, abs(m)]
    val = pbar * np.exp(1j * abs(m) * np.asarray(phi, dtype=np.float64))
    if m < 0:
        val = np.conj(val)
    return val[()] if np.ndim(val) == 0 else val


def sph_harm_all(p, theta, phi):
    """All ``Y_n^m`` up to degree ``p``, shape ``x.shape + ((p+1)^2,)``."""
    theta = np.asarray(theta, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    pbar = _normalized_legendre(p, np.cos(theta))
    out = np.empty(theta.shape + (ncoeffs(p),), dtype=np.complex128)
    for n in range(p + 1):
        for m in range(0, n + 1):
            v = pbar[n, m] * np.exp(1j * m * phi)
            out[..., idx(n, m)] = v
            out[..., idx(n, -m)] = np.conj(v)
    return out


def cart_to_sph(v):
    v = np.asarray(v, dtype=np.float64)
    r = np.linalg.norm(v, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        theta = np.where(r > 0, np.arccos(np.clip(v[..., 2] / np.where(r > 0, r, 1), -1, 1)), 0.0)
    phi = np.arctan2(v[..., 1], v[..., 0])
    return r, theta, phi

# }}}


# {{{ scaled solid harmonics

@njit
def fill_regular(x, y, z, p, out):
    """Scaled regular solid harmonics ``R_n^m`` at one point into ``out[:(p+1)^2]``."""
    r2 = x * x + y * y + z * z
    w = complex(x, y)
    out[0] = 1.0
    for m in range(0, p + 1):
        if m > 0:
            out[m * m + 2 * m] = -1j * w / (2.0 * m) * out[(m - 1) * (m - 1) + 2 * (m - 1)]
        mm = out[m * m + 2 * m]
        if m + 1 <= p:
            out[(m + 1) * (m + 1) + (m + 1) + m] = z * mm
        for n in range(m + 2, p + 1):
            out[n * n + n + m] = ((2 * n - 1) * z * out[(n - 1) * (n - 1) + (n - 1) + m]
                                  - r2 * out[(n - 2) * (n - 2) + (n - 2) + m]) / ((n - m) * (n + m))
    for n in range(1, p + 1):
        sgn = -1.0
        for m in range(1, n + 1):
            out[n * n + n - m] = sgn * out[n * n + n + m].conjugate()
            sgn = -sgn


@njit
def fill_irregular(x, y, z, p, out):
    """Scaled irregular solid harmonics ``I_n^m`` at one point (``r > 0``)."""
    r2 = x * x + y * y + z * z
    rinv2 = 1.0 / r2
    w = complex(x, y)
    out[0] = np.sqrt(rinv2)
    for m in range(0, p + 1):
        if m > 0:
            out[m * m + 2 * m] = -1j * (2 * m - 1) * w * rinv2 * out[(m - 1) * (m - 1) + 2 * (m - 1)]
        mm = out[m * m + 2 * m]
        if m + 1 <= p:
            out[(m + 1) * (m + 1) + (m + 1) + m] = (2 * m + 1) * z * rinv2 * mm
        for n in range(m + 2, p + 1):
            out[n * n + n + m] = ((2 * n - 1) * z * out[(n - 1) * (n - 1) + (n - 1) + m]
                                  - (n + m - 1) * (n - m - 1) * out[(n - 2) * (n - 2) + (n - 2) + m]) * rinv2
    for n in range(1, p + 1):
        sgn = -1.0
        for m in range(1, n + 1):
            out[n * n + n - m] = sgn * out[n * n + n + m].conjugate()
            sgn = -sgn


@njit
def _regular_many_numba(pts, p):
    out = np.empty((pts.shape[0], (p + 1) ** 2), dtype=np.complex128)
    for i in range(pts.shape[0]):
        fill_regular(pts[i, 0], pts[i, 1], pts[i, 2], p, out[i])
    return out


@njit
def _irregular_many_numba(pts, p):
    out = np.empty((pts.shape[0], (p + 1) ** 2), dtype=np.complex128)
    for i in range(pts.shape[0]):
        fill_irregular(pts[i, 0], pts[i, 1], pts[i, 2], p, out[i])
    return out


def _mirror_negative_m(out, p):
    for n in range(1, p + 1):
        for m in range(1, n + 1):
            out[:, idx(n, -m)] = (-1) ** m * np.conj(out[:, idx(n, m)])


def _regular_many_numpy(pts, p):
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    r2 = x * x + y * y + z * z
    w = x + 1j * y
    out = np.zeros((pts.shape[0], ncoeffs(p)), dtype=np.complex128)
    out[:, 0] = 1.0
    for m in range(p + 1):
        if m > 0:
            out[:, idx(m, m)] = -1j * w / (2.0 * m) * out[:, idx(m - 1, m - 1)]
        if m + 1 <= p:
            out[:, idx(m + 1, m)] = z * out[:, idx(m, m)]
        for n in range(m + 2, p + 1):
            out[:, idx(n, m)] = ((2 * n - 1) * z * out[:, idx(n - 1, m)]
                                 - r2 * out[:, idx(n - 2, m)]) / ((n - m) * (n + m))
    _mirror_negative_m(out, p)
    return out


def _irregular_many_numpy(pts, p):
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    rinv2 = 1.0 / (x * x + y * y + z * z)
    w = x + 1j * y
    out = np.zeros((pts.shape[0], ncoeffs(p)), dtype=np.complex128)
    out[:, 0] = np.sqrt(rinv2)
    for m in range(p + 1):
        if m > 0:
            out[:, idx(m, m)] = -1j * (2 * m - 1) * w * rinv2 * out[:, idx(m - 1, m - 1)]
        if m + 1 <= p:
            out[:, idx(m + 1, m)] = (2 * m + 1) * z * rinv2 * out[:, idx(m, m)]
        for n in range(m + 2, p + 1):
            out[:, idx(n, m)] = ((2 * n - 1) * z * out[:, idx(n - 1, m)]
                                 - (n + m - 1) * (n - m - 1) * out[:, idx(n - 2, m)]) * rinv2
    _mirror_negative_m(out, p)
    return out


_regular_many = pick(_regular_many_numba, _regular_many_numpy)
_irregular_many = pick(_irregular_many_numba, _irregular_many_numpy)


def regular_solid(p, pts):
    """``R_n^m`` for ``n <= p`` at points ``(N, 3)`` -> ``(N, (p+1)^2)``."""
    pts = np.ascontiguousarray(pts, dtype=np.float64).reshape(-1, 3)
    return _regular_many(pts, p)


def irregular_solid(p, pts):
    """``I_n^m`` for ``n <= p`` at nonzero points ``(N, 3)`` -> ``(N, (p+1)^2)``."""
    pts = np.ascontiguousarray(pts, dtype=np.float64).reshape(-1, 3)
    if np.any(np.einsum("ij,ij->i", pts, pts) == 0.0):
        raise ZeroDivisionError("irregular harmonic at the origin")
    return _irregular_many(pts, p)

# }}}


# {{{ basis scalings and rotation data

@lru_cache(maxsize=None)
def basis_scalings(p):
    """Factors ``s, t`` with ``R_n^m = s r^n Y_n^m`` and ``I_n^m = t Y_n^m / r^{n+1}``."""
    n, m = nm_table(p)
    am = np.abs(m)
    norm = np.array([ynorm(a, b) for a, b in zip(n, m)])
    phase = (-1j) ** am
    lf_plus = np.array([lgamma(a + b + 1) for a, b in zip(n, am)])
    lf_minus = np.array([lgamma(a - b + 1) for a, b in zip(n, am)])
    s = phase * np.exp(-lf_plus) / norm
    t = phase * np.exp(lf_minus) / norm
    return s, t


def _fibonacci_sphere(npts):
    k = np.arange(npts) + 0.5
    z = 1 - 2 * k / npts
    phi = np.pi * (1 + 5**0.5) * k
    rho = np.sqrt(1 - z * z)
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)


@lru_cache(maxsize=None)
def swap_yz_matrices(p):
    """Degree-block matrices for the reflection ``J: (x, y, z) -> (x, z, y)``.

    Returns ``(pack, offsets)``: block ``n`` (size ``(2n+1)^2``, row-major,
    index ``m + n``) is ``W`` with ``Y_m(J y) = sum_k W[k, m] Y_k(y)`` in the
    orthonormal basis. Computed once per degree by least squares on a
    well-spread point set; the blocks are real-orthogonal up to roundoff.
    """
    npts = max(64, 6 * (2 * p + 1))
    pts = _fibonacci_sphere(npts)
    _, th, ph = cart_to_sph(pts)
    _, thj, phj = cart_to_sph(pts[:, [0, 2, 1]])
    ya = sph_harm_all(p, th, ph)
    yb = sph_harm_all(p, thj, phj)
    offsets = np.zeros(p + 2, dtype=np.int64)
    for n in range(p + 1):
        offsets[n + 1] = offsets[n] + (2 * n + 1) ** 2
    pack = np.zeros(offsets[-1], dtype=np.complex128)
    for n in range(p + 1):
        sl = slice(n * n, (n + 1) * (n + 1))
        w, *_ = np.linalg.lstsq(ya[:, sl], yb[:, sl], rcond=None)
        pack[offsets[n]:offsets[n + 1]] = w.reshape(-1)
    pack.flags.writeable = False
    return pack, offsets

# }}}
