"""Batched formation, translation and evaluation on scaled coefficients.

Pairs are processed in the order given, so accumulation is deterministic.
"""
import numpy as np

from .._jit import njit, pick
from ..expansions.harmonics import fill_irregular, fill_regular, ncoeffs
from ..expansions.kernels import LOCAL, MULTIPOLE, p2e
from ..expansions.translation import L2L, M2L, M2M, _pas_numba, _pas_numpy, rotation_tables

__all__ = ["LOCAL", "MULTIPOLE", "M2M", "M2L", "L2L", "translate_pairs", "eval_owned",
           "form_at_centers"]


@njit
def _pairs_numba(kind, a_all, a_ctr, b_ctr, pairs, p, q, pack, off, sreg, sirr, fact, out_all):
    for k in range(pairs.shape[0]):
        i = pairs[k, 0]
        j = pairs[k, 1]
        _pas_numba(kind, a_all[i], b_ctr[j, 0] - a_ctr[i, 0], b_ctr[j, 1] - a_ctr[i, 1],
                   b_ctr[j, 2] - a_ctr[i, 2], p, q, pack, off, sreg, sirr, fact, out_all[j])


def _pairs_numpy(kind, a_all, a_ctr, b_ctr, pairs, p, q, pack, off, sreg, sirr, fact, out_all):
    for i, j in pairs:
        d = b_ctr[j] - a_ctr[i]
        _pas_numpy(kind, a_all[i], d[0], d[1], d[2], p, q, pack, off, sreg, sirr, fact, out_all[j])


_pairs = pick(_pairs_numba, _pairs_numpy)


def translate_pairs(kind, a_all, a_ctr, b_ctr, pairs, p, q, out_all):
    """``out_all[j] += T(a_all[i])`` for each ``(i, j)`` in ``pairs``."""
    pairs = np.ascontiguousarray(pairs, dtype=np.int64).reshape(-1, 2)
    if pairs.shape[0] == 0:
        return out_all
    pack, off, s, t, fact = rotation_tables(max(p, q, (p + q + 1) // 2))
    _pairs(kind, a_all, np.ascontiguousarray(a_ctr), np.ascontiguousarray(b_ctr), pairs,
           p, q, pack, off, s, t, fact, out_all)
    return out_all


@njit
def _eval_owned_numba(kind, coeffs, ctr, owner, tgt, p, out):
    h = np.empty((p + 1) ** 2, dtype=np.complex128)
    for i in range(tgt.shape[0]):
        o = owner[i]
        x = tgt[i, 0] - ctr[o, 0]
        y = tgt[i, 1] - ctr[o, 1]
        z = tgt[i, 2] - ctr[o, 2]
        if kind == LOCAL:
            fill_regular(x, y, z, p, h)
        else:
            fill_irregular(x, y, z, p, h)
        acc = 0j
        for k in range((p + 1) ** 2):
            acc += coeffs[o, k] * h[k]
        out[i] += acc.real


def _eval_owned_numpy(kind, coeffs, ctr, owner, tgt, p, out):
    from ..expansions.harmonics import irregular_solid, regular_solid
    rel = tgt - ctr[owner]
    h = regular_solid(p, rel) if kind == LOCAL else irregular_solid(p, rel)
    out += np.einsum("ik,ik->i", h, coeffs[owner]).real


_eval_owned = pick(_eval_owned_numba, _eval_owned_numpy)


def eval_owned(kind, coeffs, ctr, owner, tgt, p, out):
    """``out[i] += Re sum coeffs[owner[i]] * basis(tgt[i] - ctr[owner[i]])``."""
    if tgt.shape[0]:
        _eval_owned(kind, coeffs, np.ascontiguousarray(ctr), np.ascontiguousarray(owner, dtype=np.int64),
                    np.ascontiguousarray(tgt), p, out)
    return out


def form_at_centers(kind, positions, weights, dipoles, src_ids, ctr, p, out):
    """Form expansions of the sources ``src_ids`` about every row of ``ctr``."""
    if src_ids.size == 0:
        return out
    pos = positions[src_ids]
    w = weights[src_ids]
    has_dip = dipoles is not None
    dip = dipoles[src_ids] if has_dip else np.zeros((src_ids.size, 3))
    for k in range(ctr.shape[0]):
        p2e(kind, pos, w, dip, has_dip, ctr[k, 0], ctr[k, 1], ctr[k, 2], p, out[k])
    return out


def zeros(n, p):
    return np.zeros((n, ncoeffs(p)), dtype=np.complex128)
