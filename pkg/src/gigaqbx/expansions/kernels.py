"""Formation (P2M/P2L) and evaluation kernels on scaled coefficients.

Coefficients here are the *scaled* ones of :mod:`.harmonics`, with the
``1/(4 pi)`` folded in:

* multipole ``mu = sum_s [w conj R(s - c) + conj(d . grad R(s - c))] / 4pi``,
  evaluated as ``sum mu I(t - c)``;
* local ``lam = sum_s [w conj I(s - c) + conj(d . grad I(s - c))] / 4pi``,
  evaluated as ``sum lam R(t - c)``.

Source gradients follow from the first-order terms of the addition theorems::

    d.grad R_n^m = d_z R_{n-1}^m - i/2 (d_x + i d_y) R_{n-1}^{m-1} - i/2 (d_x - i d_y) R_{n-1}^{m+1}
    d.grad I_n^m = -[d_z I_{n+1}^m + i/2 (d_x - i d_y) I_{n+1}^{m+1} + i/2 (d_x + i d_y) I_{n+1}^{m-1}]
"""
import numpy as np

from .._jit import njit, pick
from .harmonics import (fill_irregular, fill_regular, irregular_solid, ncoeffs,
                        nm_table, regular_solid)

INV_4PI = 1.0 / (4.0 * np.pi)
MULTIPOLE = 0
LOCAL = 1


# {{{ formation

@njit
def _p2e_numba(kind, src, w, dip, has_dip, cx, cy, cz, p, out):
    pp = p + 1 if kind == LOCAL else p
    h = np.empty((pp + 1) ** 2, dtype=np.complex128)
    for j in range(src.shape[0]):
        x = src[j, 0] - cx
        y = src[j, 1] - cy
        z = src[j, 2] - cz
        wj = w[j] * INV_4PI
        if kind == LOCAL:
            fill_irregular(x, y, z, pp, h)
        else:
            fill_regular(x, y, z, pp, h)
        for k in range((p + 1) ** 2):
            out[k] += wj * h[k].conjugate()
        if not has_dip:
            continue
        dx = dip[j, 0] * INV_4PI
        dy = dip[j, 1] * INV_4PI
        dz = dip[j, 2] * INV_4PI
        dp = complex(dx, dy)
        dm = complex(dx, -dy)
        for n in range(p + 1):
            for m in range(-n, n + 1):
                if kind == LOCAL:
                    n1 = n + 1
                    g = dz * h[n1 * n1 + n1 + m]
                    g += 0.5j * dm * h[n1 * n1 + n1 + m + 1]
                    g += 0.5j * dp * h[n1 * n1 + n1 + m - 1]
                    g = -g
                else:
                    if n == 0:
                        continue
                    n1 = n - 1
                    g = 0j
                    if abs(m) <= n1:
                        g += dz * h[n1 * n1 + n1 + m]
                    if abs(m - 1) <= n1:
                        g -= 0.5j * dp * h[n1 * n1 + n1 + m - 1]
                    if abs(m + 1) <= n1:
                        g -= 0.5j * dm * h[n1 * n1 + n1 + m + 1]
                out[n * n + n + m] += g.conjugate()


def _shift_index_tables(p, kind):
    """Flat indices into the harmonic table used by the gradient formulas."""
    n, m = nm_table(p)
    if kind == LOCAL:
        n1 = n + 1
        base = n1 * n1 + n1
        return (base + m, base + m + 1, base + m - 1), None
    n1 = n - 1
    base = n1 * n1 + n1
    valid = [np.abs(m + s) <= n1 for s in (0, -1, 1)]
    ix = [np.where(v, base + m + s, 0) for v, s in zip(valid, (0, -1, 1))]
    return tuple(ix), tuple(valid)


def _p2e_numpy(kind, src, w, dip, has_dip, cx, cy, cz, p, out):
    rel = src - np.array([cx, cy, cz])
    if kind == LOCAL:
        h = irregular_solid(p + 1, rel)
    else:
        h = regular_solid(p, rel)
    nc = ncoeffs(p)
    out += (w * INV_4PI) @ np.conj(h[:, :nc])
    if not has_dip:
        return
    d = dip * INV_4PI
    dp = (d[:, 0] + 1j * d[:, 1])[:, None]
    dm = (d[:, 0] - 1j * d[:, 1])[:, None]
    dz = d[:, 2][:, None]
    ix, valid = _shift_index_tables(p, kind)
    if kind == LOCAL:
        g = -(dz * h[:, ix[0]] + 0.5j * dm * h[:, ix[1]] + 0.5j * dp * h[:, ix[2]])
    else:
        g = (dz * h[:, ix[0]] * valid[0] - 0.5j * dp * h[:, ix[1]] * valid[1]
             - 0.5j * dm * h[:, ix[2]] * valid[2])
    out += np.conj(g).sum(axis=0)


p2e = pick(_p2e_numba, _p2e_numpy)

# }}}


# {{{ evaluation

@njit
def _eval_numba(kind, coeffs, p, cx, cy, cz, tgt, out):
    h = np.empty((p + 1) ** 2, dtype=np.complex128)
    for i in range(tgt.shape[0]):
        x = tgt[i, 0] - cx
        y = tgt[i, 1] - cy
        z = tgt[i, 2] - cz
        if kind == LOCAL:
            fill_regular(x, y, z, p, h)
        else:
            fill_irregular(x, y, z, p, h)
        acc = 0j
        for k in range((p + 1) ** 2):
            acc += coeffs[k] * h[k]
        out[i] += acc


def _eval_numpy(kind, coeffs, p, cx, cy, cz, tgt, out):
    rel = tgt - np.array([cx, cy, cz])
    h = regular_solid(p, rel) if kind == LOCAL else irregular_solid(p, rel)
    out += h @ coeffs


eval_scaled = pick(_eval_numba, _eval_numpy)

# }}}
