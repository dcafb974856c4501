"""Worst-case translation errors normalized by their a-priori bounds.

Three chains are measured against the exact order-``q`` local expansion of a
unit point source:

* ``m2p``: source -> multipole(p) at ``c`` -> local(q) at ``c'``;
* ``l2p``: source -> local(p) at the origin -> local(q) at ``c``;
* ``m2l``: source -> multipole(p) at ``c`` -> local(p) at the origin -> local(q) at ``c'``.

Translations use the dense operators, built once per center at the largest
order: truncating an operator's input to degree ``p`` and its output to
degree ``q`` is a slice, and every ``q`` is read off from per-degree partial
sums of the evaluated error.
"""
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product

import numpy as np

from ..expansions.harmonics import ncoeffs, regular_solid
from ..expansions.kernels import LOCAL, MULTIPOLE, p2e
from ..expansions.translation import L2L, M2L, dense_matrix

KINDS = ("m2p", "l2p", "m2l")


@dataclass(frozen=True)
class TranslationExperimentGrid:
    R: tuple = (0.1, 1.0, 10.0)
    rho: tuple = (0.1, 1.0, 10.0)
    r_frac: tuple = (0.25, 0.5, 0.75)
    orders: tuple = (3, 5, 10, 15, 20)
    n_sources: int = 42
    n_centers: tuple = (9, 19, 29)
    n_targets: int = 42

    @classmethod
    def reduced(cls):
        return cls(orders=(3, 5, 10))

    def tuples(self, kind):
        """Parameter tuples ``(R, rho, r, p, q)``; ``R`` is ``None`` for ``l2p``."""
        Rs = (None,) if kind == "l2p" else self.R
        return [(R, rho, f * rho, p, q)
                for R, rho, f, p, q in product(Rs, self.rho, self.r_frac, self.orders, self.orders)]


@dataclass
class TranslationExperimentResult:
    kind: str
    tuples: list
    normalized: np.ndarray
    samples_per_tuple: int
    extra: dict = field(default_factory=dict)

    @property
    def c_estimate(self):
        return float(self.normalized.max())

    def rows(self):
        for (R, rho, r, p, q), v in zip(self.tuples, self.normalized):
            yield {"kind": self.kind, "R": R, "rho": rho, "r": r, "p": p, "q": q,
                   "normalized_error": float(v)}


# {{{ point sets

def _deserno(n):
    """Deserno's regular equal-area placement aiming at ``n`` points (no poles)."""
    a = 4 * np.pi / n
    d = np.sqrt(a)
    m_theta = int(round(np.pi / d))
    d_theta = np.pi / m_theta
    d_phi = a / d_theta
    pts = []
    for m in range(m_theta):
        theta = np.pi * (m + 0.5) / m_theta
        m_phi = int(round(2 * np.pi * np.sin(theta) / d_phi))
        for k in range(m_phi):
            phi = 2 * np.pi * k / m_phi
            pts.append((np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)))
    return np.array(pts).reshape(-1, 3)


def _spiral(n):
    """Generalized spiral with exactly ``n`` points, poles first and last."""
    h = -1 + 2 * np.arange(n) / (n - 1)
    theta = np.arccos(h)
    phi = np.zeros(n)
    for k in range(1, n - 1):
        phi[k] = (phi[k - 1] + 3.6 / np.sqrt(n) / np.sqrt(1 - h[k] ** 2)) % (2 * np.pi)
    pts = np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], 1)[::-1]
    pts[0] = (0.0, 0.0, 1.0)
    pts[-1] = (0.0, 0.0, -1.0)
    return pts


def sphere_points(n):
    """Exactly ``n`` approximately equispaced unit-sphere points including both poles.

    Uses equal-area bands when some band count yields ``n - 2`` points, and
    the generalized spiral otherwise.
    """
    return _sphere_points(int(n)).copy()


@lru_cache(maxsize=None)
def _sphere_points(n):
    if n < 2:
        raise ValueError("need at least the two poles")
    poles = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]])
    if n == 2:
        return poles
    want = n - 2
    # the band count is a step function of the (real) target count
    for guess in np.arange(0.5 * want, 2 * want + 8, 0.01):
        pts = _deserno(guess)
        if pts.shape[0] == want:
            return np.concatenate([poles[:1], pts, poles[1:]])
    return _spiral(n)


def ball_points(radius, counts):
    """Points on concentric spheres at radii ``radius * k / len(counts)``."""
    shells = len(counts)
    return np.concatenate([radius * (k + 1) / shells * sphere_points(c) for k, c in enumerate(counts)])

# }}}


# {{{ error evaluation

def _degree_partial_errors(diff, basis, p_max):
    """``E[..., q] = |sum_{n<=q} sum_m diff * basis|`` for every ``q <= p_max``.

    diff : (S, nc) coefficient differences, basis : (T, nc) regular harmonics.
    Returns (S, T, p_max + 1).
    """
    # degree n occupies the contiguous block [n^2, (n+1)^2)
    starts = np.arange(p_max + 1) ** 2
    per_degree = np.add.reduceat(np.einsum("sk,tk->stk", diff, basis), starts, axis=-1)
    return np.abs(np.cumsum(per_degree, axis=-1).real)


def _form(kind, src, center, p):
    out = np.zeros((src.shape[0], ncoeffs(p)), dtype=np.complex128)
    zero_w = np.ones(1)
    zero_d = np.zeros((1, 3))
    for i in range(src.shape[0]):
        p2e(kind, src[i:i + 1], zero_w, zero_d, False, center[0], center[1], center[2], p, out[i])
    return out


def _bound(kind, R, rho, r, p):
    base = 1 / (4 * np.pi) / (rho - r) * (r / rho) ** (p + 1)
    if kind == "m2l":
        base += 1 / (4 * np.pi) / (rho - r) * (R / (R + rho - r)) ** (p + 1)
    return base


def _geometry_errors(kind, R, rho, r, orders, grid):
    """Max error over samples for each ``(p, q)`` pair at one geometry."""
    pmax = max(orders)
    sph_t = sphere_points(grid.n_targets)
    if kind == "l2p":
        c = np.zeros(3)
        src = np.array([[0.0, 0.0, rho]])
        centers = ball_points(r, grid.n_centers)
        ball_r = r
        coeffs = _form(LOCAL, src, c, pmax)
        op = L2L
    else:
        c = np.array([0.0, 0.0, R + rho])
        src = c + r * sphere_points(grid.n_sources)
        centers = ball_points(R, grid.n_centers)
        ball_r = R
        coeffs = _form(MULTIPOLE, src, c, pmax)
        if kind == "m2l":
            to_origin = dense_matrix(M2L, -c, pmax, pmax)
            c = np.zeros(3)
            op = L2L
        else:
            op = M2L
    worst = np.zeros((len(orders), len(orders)))
    for j, cj in enumerate(centers):
        truth = _form(LOCAL, src, cj, pmax)
        shift = dense_matrix(op, cj - c, pmax, pmax)
        tr = max(ball_r - np.linalg.norm(cj), 0.0)
        basis = regular_solid(pmax, tr * sph_t)
        for ip, p in enumerate(orders):
            k = ncoeffs(p)
            a = coeffs[:, :k]
            if kind == "m2l":
                a = a @ to_origin[:k, :k].T
            err = _degree_partial_errors(a @ shift[:, :k].T - truth, basis, pmax)
            for iq, q in enumerate(orders):
                worst[ip, iq] = max(worst[ip, iq], err[..., q].max())
    return worst


def run_translation_experiment(kind, grid: TranslationExperimentGrid = TranslationExperimentGrid()):
    """Worst normalized error per parameter tuple for one translation chain."""
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    tuples = grid.tuples(kind)
    orders = tuple(grid.orders)
    cache = {}
    normalized = np.empty(len(tuples))
    for k, (R, rho, r, p, q) in enumerate(tuples):
        key = (R, rho, r)
        if key not in cache:
            cache[key] = _geometry_errors(kind, R, rho, r, orders, grid)
        e = cache[key][orders.index(p), orders.index(q)]
        normalized[k] = e / _bound(kind, R, rho, r, p)
    nsrc = 1 if kind == "l2p" else grid.n_sources
    samples = nsrc * sum(grid.n_centers) * grid.n_targets
    return TranslationExperimentResult(kind, tuples, normalized, samples)

# }}}
