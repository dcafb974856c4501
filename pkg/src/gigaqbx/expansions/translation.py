"""M2M, M2L and L2L translation operators on scaled coefficients.

Two paths compute the same maps:

* the dense reference operators, O(p^2 q^2), straight from the addition
  theorems::

      M2M  mu'_n^m = sum_{k,l} mu_k^l conj(R_{n-k}^{m-l}(c - c'))
      L2L  lam'_k^l = sum_{n,m} lam_n^m R_{n-k}^{m-l}(c' - c)
      M2L  lam_k^l = (-1)^{k+l} sum_{n,m} mu_n^m I_{n+k}^{m-l}(c' - c)

* point-and-shoot: rotate so the shift is along +z, shift along z where
  only ``m = l`` terms survive, rotate back. A rotation about y by ``beta``
  is written as ``J R_z(-beta) J`` with ``J`` the fixed reflection swapping
  y and z, whose degree blocks are cached; this keeps every rotation at
  O(p^3).
"""
from functools import lru_cache
from math import lgamma

import numpy as np

from .._jit import njit, pick
from .harmonics import (basis_scalings, irregular_solid, ncoeffs, nm_table,
                        regular_solid, swap_yz_matrices)

M2M = 0
M2L = 1
L2L = 2
KINDS = {"M2M": M2M, "M2L": M2L, "L2L": L2L}

# rotation tables are built once up to this degree and grown on demand
_ROT_MIN_DEGREE = 32


# {{{ dense reference

@lru_cache(maxsize=64)
def _dense_index(kind, p, q):
    """Gather indices and masks for the dense operator, output order q, input order p."""
    no, mo = nm_table(q)
    ni, mi = nm_table(p)
    K = no[:, None]
    L = mo[:, None]
    N = ni[None, :]
    M = mi[None, :]
    if kind == M2L:
        dn = N + K
        dm = M - L
        mask = np.ones(dn.shape, dtype=bool)
        sign = (-1.0) ** (K + L) * np.ones(dn.shape)
        deg = p + q
    elif kind == M2M:
        # output (n, m) = (K, L), input (k, l) = (N, M)
        dn = K - N
        dm = L - M
        mask = (dn >= 0) & (np.abs(dm) <= dn)
        sign = np.ones(dn.shape)
        deg = q
    else:
        # output (k, l) = (K, L), input (n, m) = (N, M)
        dn = N - K
        dm = M - L
        mask = (dn >= 0) & (np.abs(dm) <= dn)
        sign = np.ones(dn.shape)
        deg = p
    dn_c = np.where(mask, dn, 0)
    dm_c = np.where(mask, dm, 0)
    flat = dn_c * dn_c + dn_c + dm_c
    return flat, mask, sign, deg


def dense_matrix(kind, d, p, q):
    """Matrix ``T`` with ``out = T @ coeffs_in``; ``d = new_center - old_center``."""
    flat, mask, sign, deg = _dense_index(kind, p, q)
    d = np.asarray(d, dtype=np.float64).reshape(1, 3)
    if kind == M2L:
        h = irregular_solid(deg, d)[0]
    elif kind == M2M:
        h = np.conj(regular_solid(deg, -d)[0])
    else:
        h = regular_solid(deg, d)[0]
    return np.where(mask, sign * h[flat], 0.0)


def translate_dense(kind, coeffs, d, p, q):
    return dense_matrix(kind, d, p, q) @ coeffs

# }}}


# {{{ point-and-shoot

@lru_cache(maxsize=None)
def _rotation_tables(pmax):
    pmax = max(pmax, _ROT_MIN_DEGREE)
    pack, off = swap_yz_matrices(pmax)
    s, t = basis_scalings(pmax)
    logfact = np.array([lgamma(k + 1) for k in range(2 * pmax + 2)])
    return pack, off, s, t, np.exp(logfact)


def rotation_tables(p):
    # round up so the cache does not hold one table per order
    return _rotation_tables(max(_ROT_MIN_DEGREE, int(np.ceil(p / 16) * 16)))


@njit
def _rot_z(a, p, alpha, out):
    for n in range(p + 1):
        for m in range(-n, n + 1):
            out[n * n + n + m] = a[n * n + n + m] * np.exp(-1j * m * alpha)


@njit
def _rot_j(a, p, scale, pack, off, out, work):
    for n in range(p + 1):
        w = 2 * n + 1
        base = n * n
        for m in range(w):
            work[m] = a[base + m] * scale[base + m]
        o = off[n]
        for k in range(w):
            acc = 0j
            for m in range(w):
                acc += pack[o + k * w + m] * work[m]
            out[base + k] = acc / scale[base + k]


@njit
def _shift_z(kind, a, p, q, dist, fact, out):
    for k in range(q + 1):
        for l in range(-k, k + 1):
            out[k * k + k + l] = 0.0
    if kind == L2L:
        for k in range(q + 1):
            for l in range(-k, k + 1):
                acc = 0j
                for n in range(max(k, abs(l)), p + 1):
                    acc += a[n * n + n + l] * dist ** (n - k) / fact[n - k]
                out[k * k + k + l] = acc
    elif kind == M2M:
        for n in range(q + 1):
            for m in range(-n, n + 1):
                acc = 0j
                for k in range(abs(m), min(n, p) + 1):
                    acc += a[k * k + k + m] * (-dist) ** (n - k) / fact[n - k]
                out[n * n + n + m] = acc
    else:
        for k in range(q + 1):
            for l in range(-k, k + 1):
                acc = 0j
                for n in range(abs(l), p + 1):
                    acc += a[n * n + n + l] * fact[n + k] / dist ** (n + k + 1)
                if (k + l) % 2:
                    acc = -acc
                out[k * k + k + l] = acc


@njit
def _pas_numba(kind, a, dx, dy, dz, p, q, pack, off, sreg, sirr, fact, out):
    """Accumulate the point-and-shoot translation of ``a`` into ``out``."""
    pq = max(p, q)
    sz = (pq + 1) ** 2
    b1 = np.zeros(sz, dtype=np.complex128)
    b2 = np.zeros(sz, dtype=np.complex128)
    work = np.empty(2 * pq + 1, dtype=np.complex128)
    dist = np.sqrt(dx * dx + dy * dy + dz * dz)
    if dist == 0.0:
        for n in range(min(p, q) + 1):
            for m in range(-n, n + 1):
                out[n * n + n + m] += a[n * n + n + m]
        return
    theta = np.arccos(min(1.0, max(-1.0, dz / dist)))
    phi = np.arctan2(dy, dx)
    sin_ = sirr if kind != L2L else sreg
    sout = sirr if kind == M2M else sreg
    # forward rotation Q = R_y(-theta) R_z(-phi)
    _rot_z(a, p, -phi, b1)
    _rot_j(b1, p, sin_, pack, off, b2, work)
    _rot_z(b2, p, theta, b1)
    _rot_j(b1, p, sin_, pack, off, b2, work)
    _shift_z(kind, b2, p, q, dist, fact, b1)
    # inverse rotation Q^T = R_z(phi) R_y(theta)
    _rot_j(b1, q, sout, pack, off, b2, work)
    _rot_z(b2, q, -theta, b1)
    _rot_j(b1, q, sout, pack, off, b2, work)
    _rot_z(b2, q, phi, b1)
    for k in range((q + 1) ** 2):
        out[k] += b1[k]


def _np_rot_z(a, p, alpha):
    _, m = nm_table(p)
    return a * np.exp(-1j * m * alpha)


def _np_rot_j(a, p, scale, pack, off):
    out = np.empty_like(a)
    for n in range(p + 1):
        w = 2 * n + 1
        sl = slice(n * n, (n + 1) ** 2)
        mat = pack[off[n]:off[n + 1]].reshape(w, w)
        out[sl] = (mat @ (a[sl] * scale[sl])) / scale[sl]
    return out


def _np_shift_z(kind, a, p, q, dist, fact):
    n_in, m_in = nm_table(p)
    n_out, m_out = nm_table(q)
    same_m = m_out[:, None] == m_in[None, :]
    if kind == L2L:
        j = n_in[None, :] - n_out[:, None]
        ok = same_m & (j >= 0)
        coef = np.where(ok, dist ** np.where(ok, j, 0) / fact[np.where(ok, j, 0)], 0.0)
    elif kind == M2M:
        j = n_out[:, None] - n_in[None, :]
        ok = same_m & (j >= 0)
        coef = np.where(ok, (-dist) ** np.where(ok, j, 0) / fact[np.where(ok, j, 0)], 0.0)
    else:
        s = n_in[None, :] + n_out[:, None]
        sign = (-1.0) ** (n_out + m_out)[:, None]
        coef = np.where(same_m, sign * fact[s] / dist ** (s + 1), 0.0)
    return coef @ a[:ncoeffs(p)]


def _pas_numpy(kind, a, dx, dy, dz, p, q, pack, off, sreg, sirr, fact, out):
    dist = np.sqrt(dx * dx + dy * dy + dz * dz)
    if dist == 0.0:
        k = ncoeffs(min(p, q))
        out[:k] += a[:k]
        return
    theta = np.arccos(np.clip(dz / dist, -1.0, 1.0))
    phi = np.arctan2(dy, dx)
    sin_ = sirr if kind != L2L else sreg
    sout = sirr if kind == M2M else sreg
    b = _np_rot_z(a[:ncoeffs(p)], p, -phi)
    b = _np_rot_j(b, p, sin_, pack, off)
    b = _np_rot_z(b, p, theta)
    b = _np_rot_j(b, p, sin_, pack, off)
    b = _np_shift_z(kind, b, p, q, dist, fact)
    b = _np_rot_j(b, q, sout, pack, off)
    b = _np_rot_z(b, q, -theta)
    b = _np_rot_j(b, q, sout, pack, off)
    out[:ncoeffs(q)] += _np_rot_z(b, q, phi)


pas_accumulate = pick(_pas_numba, _pas_numpy)


def translate_pas(kind, coeffs, d, p, q):
    pack, off, s, t, fact = rotation_tables(max(p, q, (p + q + 1) // 2))
    if fact.shape[0] < p + q + 2:
        raise ValueError("factorial table too short")
    out = np.zeros(ncoeffs(q), dtype=np.complex128)
    dx, dy, dz = (float(v) for v in d)
    pas_accumulate(kind, np.ascontiguousarray(coeffs, dtype=np.complex128),
                   dx, dy, dz, p, q, pack, off, s, t, fact, out)
    return out

# }}}
