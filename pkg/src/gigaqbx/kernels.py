"""Laplace Green's function, point sources, and dense direct summation.

Conventions
-----------
``G(x, y) = 1 / (4 pi |x - y|)``. A dipole of moment ``m`` at ``y`` produces
``m . grad_y G(x, y) = m . (x - y) / (4 pi |x - y|^3)``; double-layer sources
carry ``m = weight * density * normal`` premultiplied.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._jit import njit, pick

INV_4PI = 1.0 / (4.0 * np.pi)


class CoincidentPointError(ValueError):
    """Raised when a target coincides with a source."""

    def __init__(self, target_index, source_index):
        self.pair = (int(target_index), int(source_index))
        super().__init__(f"target {self.pair[0]} coincides with source {self.pair[1]}")


@dataclass(frozen=True)
class SourceEnsemble:
    """Point sources: positions ``(N, 3)``, weights ``(N,)``, optional dipoles ``(N, 3)``."""

    positions: np.ndarray
    weights: np.ndarray
    dipole_moments: Optional[np.ndarray] = None

    def __post_init__(self):
        pos = np.ascontiguousarray(self.positions, dtype=np.float64).reshape(-1, 3)
        w = np.ascontiguousarray(self.weights, dtype=np.float64).reshape(-1)
        if w.shape[0] != pos.shape[0]:
            raise ValueError("weights and positions differ in length")
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(w))):
            raise ValueError("non-finite source data")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "weights", w)
        if self.dipole_moments is not None:
            d = np.ascontiguousarray(self.dipole_moments, dtype=np.float64).reshape(-1, 3)
            if d.shape[0] != pos.shape[0]:
                raise ValueError("dipole_moments and positions differ in length")
            if not np.all(np.isfinite(d)):
                raise ValueError("non-finite dipole moments")
            object.__setattr__(self, "dipole_moments", d)

    def __len__(self):
        return self.positions.shape[0]

    @property
    def dipoles_or_zeros(self):
        if self.dipole_moments is None:
            return np.zeros_like(self.positions)
        return self.dipole_moments

    @property
    def has_dipoles(self):
        return self.dipole_moments is not None

    def total_strength(self):
        """``sum |w_i|``, the ``A`` appearing in the FMM accuracy estimate."""
        return float(np.abs(self.weights).sum())


def laplace_green(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    r = np.linalg.norm(x - y)
    if r == 0.0:
        raise CoincidentPointError(0, 0)
    return INV_4PI / r


def laplace_dipole(x, y, m):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    d = x - y
    r = np.linalg.norm(d)
    if r == 0.0:
        raise CoincidentPointError(0, 0)
    return INV_4PI * float(np.dot(m, d)) / r**3


# {{{ direct summation

@njit
def _p2p_numba(src, w, dip, tgt, out):
    # returns (i, j) of the first coincidence, or (-1, -1)
    nt = tgt.shape[0]
    ns = src.shape[0]
    for i in range(nt):
        tx, ty, tz = tgt[i, 0], tgt[i, 1], tgt[i, 2]
        acc = 0.0
        for j in range(ns):
            dx = tx - src[j, 0]
            dy = ty - src[j, 1]
            dz = tz - src[j, 2]
            r2 = dx * dx + dy * dy + dz * dz
            if r2 == 0.0:
                return i, j
            rinv = 1.0 / np.sqrt(r2)
            acc += rinv * (w[j] + (dip[j, 0] * dx + dip[j, 1] * dy + dip[j, 2] * dz) * rinv * rinv)
        out[i] += acc * INV_4PI
    return -1, -1


def _p2p_numpy(src, w, dip, tgt, out, chunk=2048):
    for start in range(0, tgt.shape[0], chunk):
        t = tgt[start:start + chunk]
        d = t[:, None, :] - src[None, :, :]
        r2 = np.einsum("ijk,ijk->ij", d, d)
        bad = np.argwhere(r2 == 0.0)
        if bad.size:
            return start + int(bad[0, 0]), int(bad[0, 1])
        rinv = 1.0 / np.sqrt(r2)
        val = rinv * (w[None, :] + np.einsum("ijk,jk->ij", d, dip) * rinv**2)
        out[start:start + chunk] += val.sum(axis=1) * INV_4PI
    return -1, -1


_p2p = pick(_p2p_numba, _p2p_numpy)


def direct_sum(sources: SourceEnsemble, targets, out=None):
    """Potential at ``targets`` (``(M, 3)``) due to all ``sources``, O(N M).

    Raises
    ------
    CoincidentPointError
        carrying the offending ``(target, source)`` pair.
    """
    tgt = np.ascontiguousarray(targets, dtype=np.float64).reshape(-1, 3)
    if out is None:
        out = np.zeros(tgt.shape[0])
    if len(sources) == 0 or tgt.shape[0] == 0:
        return out
    i, j = _p2p(sources.positions, sources.weights, sources.dipoles_or_zeros, tgt, out)
    if i >= 0:
        raise CoincidentPointError(i, j)
    return out

# }}}
