"""Source-to-target QBX evaluation without explicit coefficients.

By the Legendre addition theorem, the order-``p`` local expansion of
``1 / (4 pi |t - s|)`` about ``c`` evaluated at ``t`` is

    (1/4pi) sum_{n<=p} r^n / rho^(n+1) P_n(cos g),

with ``r = |t - c|``, ``rho = |s - c|`` and ``g`` the angle between
``t - c`` and ``s - c``. Its source gradient gives the dipole term, so each
(source, target) pair costs O(p) instead of O(p^2).
"""
import numpy as np

from .._jit import njit, pick
from ..kernels import INV_4PI


class ExpansionDomainError(ValueError):
    pass


@njit
def _qbx_numba(src, w, dip, has_dip, tpos, tctr, p, out):
    nt = tpos.shape[0]
    ns = src.shape[0]
    for i in range(nt):
        cx, cy, cz = tctr[i, 0], tctr[i, 1], tctr[i, 2]
        ax = tpos[i, 0] - cx
        ay = tpos[i, 1] - cy
        az = tpos[i, 2] - cz
        r = np.sqrt(ax * ax + ay * ay + az * az)
        if r > 0.0:
            ax /= r
            ay /= r
            az /= r
        acc = 0.0
        for j in range(ns):
            bx = src[j, 0] - cx
            by = src[j, 1] - cy
            bz = src[j, 2] - cz
            rho = np.sqrt(bx * bx + by * by + bz * bz)
            if rho == 0.0:
                return i, j
            bx /= rho
            by /= rho
            bz /= rho
            x = ax * bx + ay * by + az * bz
            q = r / rho
            scale = 1.0 / rho
            pm1 = 0.0
            pn = 1.0
            dpn = 0.0
            sw = 0.0
            sdb = 0.0
            sda = 0.0
            for n in range(p + 1):
                sw += scale * pn
                if has_dip:
                    sdb += scale * (-(n + 1) * pn - x * dpn)
                    sda += scale * dpn
                pnext = ((2 * n + 1) * x * pn - n * pm1) / (n + 1)
                dpn = (n + 1) * pn + x * dpn
                pm1 = pn
                pn = pnext
                scale *= q
            val = w[j] * sw
            if has_dip:
                db = dip[j, 0] * bx + dip[j, 1] * by + dip[j, 2] * bz
                da = dip[j, 0] * ax + dip[j, 1] * ay + dip[j, 2] * az
                val += (sdb * db + sda * da) / rho
            acc += val
        out[i] += acc * INV_4PI
    return -1, -1


def _qbx_numpy(src, w, dip, has_dip, tpos, tctr, p, out, chunk=512):
    for start in range(0, tpos.shape[0], chunk):
        sl = slice(start, start + chunk)
        a = tpos[sl] - tctr[sl]
        r = np.linalg.norm(a, axis=1)
        ah = a / np.where(r > 0, r, 1.0)[:, None]
        b = src[None, :, :] - tctr[sl][:, None, :]
        rho = np.linalg.norm(b, axis=2)
        bad = np.argwhere(rho == 0.0)
        if bad.size:
            return start + int(bad[0, 0]), int(bad[0, 1])
        bh = b / rho[..., None]
        x = np.einsum("ik,ijk->ij", ah, bh)
        q = r[:, None] / rho
        scale = 1.0 / rho
        pm1 = np.zeros_like(x)
        pn = np.ones_like(x)
        dpn = np.zeros_like(x)
        sw = np.zeros_like(x)
        sdb = np.zeros_like(x)
        sda = np.zeros_like(x)
        for n in range(p + 1):
            sw += scale * pn
            if has_dip:
                sdb += scale * (-(n + 1) * pn - x * dpn)
                sda += scale * dpn
            pnext = ((2 * n + 1) * x * pn - n * pm1) / (n + 1)
            dpn = (n + 1) * pn + x * dpn
            pm1, pn = pn, pnext
            scale = scale * q
        val = w[None, :] * sw
        if has_dip:
            db = np.einsum("ijk,jk->ij", bh, dip)
            da = ah @ dip.T
            val += (sdb * db + sda * da) / rho
        out[sl] += val.sum(axis=1) * INV_4PI
    return -1, -1


qbx_pairs = pick(_qbx_numba, _qbx_numpy)


def qbx_direct(positions, weights, dipoles, targets, target_centers, p, out=None):
    """Add the order-``p`` QBX value at each target from every given source.

    Raises
    ------
    ExpansionDomainError
        if a source coincides with an expansion center.
    """
    tpos = np.ascontiguousarray(targets, dtype=np.float64).reshape(-1, 3)
    tctr = np.ascontiguousarray(target_centers, dtype=np.float64).reshape(-1, 3)
    if out is None:
        out = np.zeros(tpos.shape[0])
    if tpos.shape[0] == 0 or positions.shape[0] == 0:
        return out
    has_dip = dipoles is not None
    dip = dipoles if has_dip else np.zeros((positions.shape[0], 3))
    i, j = qbx_pairs(np.ascontiguousarray(positions), np.ascontiguousarray(weights),
                     np.ascontiguousarray(dip), has_dip, tpos, tctr, int(p), out)
    if i >= 0:
        raise ExpansionDomainError(
            f"source {j} coincides with the expansion center of target {i}")
    return out
