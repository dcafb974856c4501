"""Reference-triangle machinery: orthonormal basis, nodes, quadrature.

Elements are stored on the bi-unit right triangle ``(-1,-1), (1,-1), (-1,1)``
in coordinates ``(r, s)``. The equilateral triangle with vertices
``(-1,-1/sqrt3), (1,-1/sqrt3), (0,2/sqrt3)`` is used where a
shape-independent measure is needed; :data:`EQ_JACOBIAN` maps between them.

Basis: the Koornwinder-Dubiner orthonormal polynomials. Nodes:
warp-and-blend (Hesthaven-Warburton). Quadrature: collapsed-coordinate
Gauss-Legendre x Gauss-Jacobi(1, 0) tensor rules.
"""
from functools import lru_cache

import numpy as np
from scipy.special import eval_jacobi, gammaln, roots_jacobi

SQRT3 = np.sqrt(3.0)

#: d(equilateral)/d(r, s); columns are the images of the r and s directions
EQ_JACOBIAN = np.array([[1.0, 0.5], [0.0, SQRT3 / 2]])
EQ_JACOBIAN_INV = np.linalg.inv(EQ_JACOBIAN)
EQ_VERTICES = np.array([[-1.0, -1 / SQRT3], [1.0, -1 / SQRT3], [0.0, 2 / SQRT3]])


def eq_to_biunit(pts):
    pts = np.asarray(pts, dtype=np.float64)
    return (pts - EQ_VERTICES[0]) @ EQ_JACOBIAN_INV.T - 1.0


def biunit_to_eq(rs):
    rs = np.asarray(rs, dtype=np.float64)
    return (rs + 1.0) @ EQ_JACOBIAN.T + EQ_VERTICES[0]


def nnodes(order):
    return (order + 1) * (order + 2) // 2


def mode_degrees(order):
    return np.array([i + j for i in range(order + 1) for j in range(order + 1 - i)])


# {{{ orthonormal basis

def jacobi_normalized(x, alpha, beta, n):
    """Jacobi polynomial normalized to unit L2 norm on [-1, 1] with its weight."""
    if n < 0:
        return np.zeros_like(np.asarray(x, dtype=np.float64))
    lg = ((alpha + beta + 1) * np.log(2) - np.log(2 * n + alpha + beta + 1)
          + gammaln(n + alpha + 1) + gammaln(n + beta + 1)
          - gammaln(n + alpha + beta + 1) - gammaln(n + 1))
    return eval_jacobi(n, alpha, beta, x) / np.exp(0.5 * lg)


def jacobi_normalized_deriv(x, alpha, beta, n):
    if n == 0:
        return np.zeros_like(np.asarray(x, dtype=np.float64))
    return np.sqrt(n * (n + alpha + beta + 1)) * jacobi_normalized(x, alpha + 1, beta + 1, n - 1)


def _rs_to_ab(r, s):
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(s != 1.0, 2 * (1 + r) / np.where(s != 1.0, 1 - s, 1.0) - 1, -1.0)
    return a, s


def _simplex_p(a, b, i, j):
    h1 = jacobi_normalized(a, 0, 0, i)
    h2 = jacobi_normalized(b, 2 * i + 1, 0, j)
    return np.sqrt(2.0) * h1 * h2 * (1 - b) ** i


def _grad_simplex_p(a, b, i, j):
    fa = jacobi_normalized(a, 0, 0, i)
    dfa = jacobi_normalized_deriv(a, 0, 0, i)
    gb = jacobi_normalized(b, 2 * i + 1, 0, j)
    dgb = jacobi_normalized_deriv(b, 2 * i + 1, 0, j)
    dmr = dfa * gb
    if i > 0:
        dmr = dmr * (0.5 * (1 - b)) ** (i - 1)
    dms = dfa * (gb * (0.5 * (1 + a)))
    if i > 0:
        dms = dms * (0.5 * (1 - b)) ** (i - 1)
    tmp = dgb * (0.5 * (1 - b)) ** i
    if i > 0:
        tmp = tmp - 0.5 * i * gb * (0.5 * (1 - b)) ** (i - 1)
    dms = dms + fa * tmp
    scale = 2 ** (i + 0.5)
    return dmr * scale, dms * scale


def vandermonde(order, rs):
    """``V[k, mode]`` of the orthonormal basis at points ``rs`` ``(K, 2)``."""
    rs = np.asarray(rs, dtype=np.float64).reshape(-1, 2)
    a, b = _rs_to_ab(rs[:, 0], rs[:, 1])
    cols = [_simplex_p(a, b, i, j) for i in range(order + 1) for j in range(order + 1 - i)]
    return np.stack(cols, axis=1)


def grad_vandermonde(order, rs):
    rs = np.asarray(rs, dtype=np.float64).reshape(-1, 2)
    a, b = _rs_to_ab(rs[:, 0], rs[:, 1])
    gr, gs = [], []
    for i in range(order + 1):
        for j in range(order + 1 - i):
            dr, ds = _grad_simplex_p(a, b, i, j)
            gr.append(dr)
            gs.append(ds)
    return np.stack(gr, axis=1), np.stack(gs, axis=1)

# }}}


# {{{ warp-and-blend nodes

_ALPHA_OPT = [0.0, 0.0, 1.4152, 0.1001, 0.2751, 0.9800, 1.0999, 1.2832, 1.3648,
              1.4773, 1.4959, 1.5743, 1.5770, 1.6223, 1.6258]


def _gll(n):
    if n == 1:
        return np.array([-1.0, 1.0])
    x, _ = roots_jacobi(n - 1, 1, 1)
    return np.concatenate([[-1.0], np.sort(x), [1.0]])


def _warp_factor(n, rout):
    lgl = _gll(n)
    req = np.linspace(-1, 1, n + 1)
    veq = np.stack([jacobi_normalized(req, 0, 0, i) for i in range(n + 1)], axis=1)
    pmat = np.stack([jacobi_normalized(rout, 0, 0, i) for i in range(n + 1)], axis=0)
    lmat = np.linalg.solve(veq.T, pmat)
    warp = lmat.T @ (lgl - req)
    zerof = np.abs(rout) < 1.0 - 1.0e-10
    sf = 1.0 - (zerof * rout) ** 2
    return warp / np.where(zerof, sf, 1.0) * zerof


@lru_cache(maxsize=None)
def warp_blend_nodes(order):
    """Nodes in bi-unit ``(r, s)`` coordinates, shape ``(nnodes, 2)``."""
    if order == 0:
        return np.array([[-1 / 3, -1 / 3]])
    alpha = _ALPHA_OPT[order] if order < len(_ALPHA_OPT) else 5.0 / 3.0
    l1, l3 = [], []
    for n in range(order + 1):
        for m in range(order + 1 - n):
            l1.append(n / order)
            l3.append(m / order)
    l1 = np.array(l1)
    l3 = np.array(l3)
    l2 = 1.0 - l1 - l3
    x = -l2 + l3
    y = (-l2 - l3 + 2 * l1) / SQRT3
    b1, b2, b3 = 4 * l2 * l3, 4 * l1 * l3, 4 * l1 * l2
    w1 = b1 * _warp_factor(order, l3 - l2) * (1 + (alpha * l1) ** 2)
    w2 = b2 * _warp_factor(order, l1 - l3) * (1 + (alpha * l2) ** 2)
    w3 = b3 * _warp_factor(order, l2 - l1) * (1 + (alpha * l3) ** 2)
    x = x + w1 + np.cos(2 * np.pi / 3) * w2 + np.cos(4 * np.pi / 3) * w3
    y = y + np.sin(2 * np.pi / 3) * w2 + np.sin(4 * np.pi / 3) * w3
    out = eq_to_biunit(np.stack([x, y], axis=1))
    out.flags.writeable = False
    return out


@lru_cache(maxsize=None)
def interior_sample_points():
    """15 interior points used when sampling per-element maxima."""
    nodes = warp_blend_nodes(7)
    r, s = nodes[:, 0], nodes[:, 1]
    tol = 1e-12
    interior = (r > -1 + tol) & (s > -1 + tol) & (r + s < -tol)
    pts = nodes[interior]
    assert pts.shape[0] == 15
    return pts

# }}}


# {{{ element operators

class ReferenceElement:
    """Nodal operators for polynomial order ``order`` on the bi-unit triangle."""

    def __init__(self, order):
        self.order = order
        self.nodes = warp_blend_nodes(order)
        self.vdm = vandermonde(order, self.nodes)
        self.vdm_inv = np.linalg.inv(self.vdm)
        vr, vs = grad_vandermonde(order, self.nodes)
        self.diff_r = vr @ self.vdm_inv
        self.diff_s = vs @ self.vdm_inv
        self.mode_degrees = mode_degrees(order)

    @property
    def nnodes(self):
        return self.nodes.shape[0]

    def condition_number(self):
        return np.linalg.cond(self.vdm)

    def interp_matrix(self, rs):
        return vandermonde(self.order, rs) @ self.vdm_inv

    def diff_matrices_at(self, rs):
        vr, vs = grad_vandermonde(self.order, rs)
        return vr @ self.vdm_inv, vs @ self.vdm_inv


@lru_cache(maxsize=None)
def reference_element(order):
    return ReferenceElement(order)

# }}}


# {{{ quadrature

@lru_cache(maxsize=None)
def collapsed_gauss_rule(npts_1d):
    """Tensor Gauss rule on the bi-unit triangle, exact for total degree ``2*npts_1d - 1``."""
    a, wa = roots_jacobi(npts_1d, 0, 0)
    b, wb = roots_jacobi(npts_1d, 1, 0)
    A, B = np.meshgrid(a, b, indexing="ij")
    WA, WB = np.meshgrid(wa, wb, indexing="ij")
    r = 0.5 * (1 + A) * (1 - B) - 1
    s = B
    nodes = np.stack([r.ravel(), s.ravel()], axis=1)
    weights = 0.5 * (WA * WB).ravel()
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return nodes, weights


def quadrature_rule(quad_order):
    """Rule of order of accuracy ``quad_order`` (exact to degree ``quad_order - 1``)."""
    if quad_order < 1:
        raise ValueError("quadrature order must be >= 1")
    return collapsed_gauss_rule((quad_order + 1) // 2)

# }}}
