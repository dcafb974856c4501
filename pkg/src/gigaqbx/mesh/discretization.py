"""Curved triangular surface discretizations.

Every element ``k`` is a degree-``N_t`` polynomial map ``Psi_k`` from the
bi-unit reference triangle to R^3, stored by its values at the
warp-and-blend nodes. Genealogy is kept as the index of the root element
plus the element's three vertices in the root's reference coordinates.
"""
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .reference import (EQ_JACOBIAN_INV, eq_to_biunit, interior_sample_points,
                        quadrature_rule, reference_element)

STAGES = ("stage1", "stage2", "stage2quad")

_REF_VERTS = np.array([[-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]])


class DegenerateElementError(ValueError):
    pass


def affine_from_vertices(verts, rs):
    """Map bi-unit reference points into the triangle with (2D) ``verts``."""
    rs = np.asarray(rs, dtype=np.float64)
    v0, v1, v2 = verts
    return v0 + np.multiply.outer((rs[..., 0] + 1) / 2, v1 - v0) + np.multiply.outer((rs[..., 1] + 1) / 2, v2 - v0)


def child_vertices(verts):
    """Four midpoint-subdivision children of a triangle, orientation preserved."""
    v0, v1, v2 = verts
    m01, m12, m02 = (v0 + v1) / 2, (v1 + v2) / 2, (v0 + v2) / 2
    return [np.array(t) for t in ([v0, m01, m02], [m01, v1, m12], [m02, m12, v2], [m12, m02, m01])]


def _jacobians(nodes, dr, ds):
    """``(..., npts, 3, 2)`` Jacobians from nodal coordinates."""
    jr = np.einsum("pn,...nd->...pd", dr, nodes)
    js = np.einsum("pn,...nd->...pd", ds, nodes)
    return np.stack([jr, js], axis=-1)


def stretch_from_jacobian(jac):
    """``2 sigma_1`` of the Jacobian taken w.r.t. the equilateral reference."""
    jt = jac @ EQ_JACOBIAN_INV
    return 2 * np.linalg.svd(jt, compute_uv=False)[..., 0]


def curvatures_from_derivatives(jac, xrr, xrs, xss):
    """Principal curvatures (sorted, descending) from first/second derivatives.

    Sign convention: positive for a sphere when ``n = x_r x x_s`` points outward.
    """
    xr = jac[..., 0]
    xs = jac[..., 1]
    nrm = np.cross(xr, xs)
    nlen = np.linalg.norm(nrm, axis=-1, keepdims=True)
    if np.any(nlen == 0):
        raise DegenerateElementError("rank-deficient first fundamental form")
    n = nrm / nlen
    E = np.einsum("...d,...d", xr, xr)
    F = np.einsum("...d,...d", xr, xs)
    G = np.einsum("...d,...d", xs, xs)
    L = np.einsum("...d,...d", xrr, n)
    M = np.einsum("...d,...d", xrs, n)
    N = np.einsum("...d,...d", xss, n)
    first = np.stack([np.stack([E, F], -1), np.stack([F, G], -1)], -2)
    second = np.stack([np.stack([L, M], -1), np.stack([M, N], -1)], -2)
    shape_op = -np.linalg.solve(first, second)
    # eigenvalues of I^{-1} II are real; compute from trace/determinant
    tr = np.trace(shape_op, axis1=-2, axis2=-1)
    det = np.linalg.det(shape_op)
    disc = np.sqrt(np.maximum(tr * tr / 4 - det, 0.0))
    return tr / 2 + disc, tr / 2 - disc


@dataclass(frozen=True)
class SurfaceDiscretization:
    """Collection of curved triangles sharing one mapping degree.

    Attributes
    ----------
    order : int
        Mapping degree ``N_t``.
    nodes : (K, Np, 3) array
        Mapping values at the reference nodes.
    stage : str
        One of ``"stage1"``, ``"stage2"``.
    root : (K,) int array
        Index of the input element each element descends from.
    ref_vertices : (K, 3, 2) array
        Element vertices in the root element's reference coordinates.
    parent : (K,) int array
        Index, in the discretization this one was bisected from, of the
        element it came from (``-1`` for elements never bisected).
    """

    order: int
    nodes: np.ndarray
    stage: str = "stage1"
    root: Optional[np.ndarray] = None
    ref_vertices: Optional[np.ndarray] = None
    parent: Optional[np.ndarray] = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=np.float64)
        if nodes.ndim != 3 or nodes.shape[2] != 3:
            raise ValueError("nodes must have shape (K, Np, 3)")
        if nodes.shape[1] != reference_element(self.order).nnodes:
            raise ValueError("node count does not match mapping degree")
        if self.stage not in STAGES[:2]:
            raise ValueError(f"bad stage {self.stage!r}")
        k = nodes.shape[0]
        object.__setattr__(self, "nodes", nodes)
        if self.root is None:
            object.__setattr__(self, "root", np.arange(k))
        if self.ref_vertices is None:
            object.__setattr__(self, "ref_vertices", np.broadcast_to(_REF_VERTS, (k, 3, 2)).copy())
        if self.parent is None:
            object.__setattr__(self, "parent", np.full(k, -1))

    # {{{ basic geometry

    @property
    def nelements(self):
        return self.nodes.shape[0]

    @property
    def ref(self):
        return reference_element(self.order)

    @property
    def nnodes(self):
        return self.nodes.shape[0] * self.nodes.shape[1]

    @property
    def points(self):
        return self.nodes.reshape(-1, 3)

    def element_of_node(self):
        return np.repeat(np.arange(self.nelements), self.ref.nnodes)

    def map_points(self, rs, elements=None):
        """Evaluate the mappings at bi-unit points ``rs``: ``(K, npts, 3)``."""
        nodes = self.nodes if elements is None else self.nodes[elements]
        return np.einsum("pn,knd->kpd", self.ref.interp_matrix(rs), nodes)

    def jacobians(self, rs=None, elements=None):
        nodes = self.nodes if elements is None else self.nodes[elements]
        if rs is None:
            dr, ds = self.ref.diff_r, self.ref.diff_s
        else:
            dr, ds = self.ref.diff_matrices_at(rs)
        return _jacobians(nodes, dr, ds)

    def second_derivatives(self, rs=None, elements=None):
        """``x_rr, x_rs, x_ss`` by applying nodal differentiation twice."""
        nodes = self.nodes if elements is None else self.nodes[elements]
        ref = self.ref
        xr = np.einsum("pn,knd->kpd", ref.diff_r, nodes)
        xs = np.einsum("pn,knd->kpd", ref.diff_s, nodes)
        if rs is None:
            dr, ds = ref.diff_r, ref.diff_s
        else:
            dr, ds = ref.diff_matrices_at(rs)
        xrr = np.einsum("pn,knd->kpd", dr, xr)
        xrs = np.einsum("pn,knd->kpd", ds, xr)
        xss = np.einsum("pn,knd->kpd", ds, xs)
        return xrr, xrs, xss

    def normals(self, rs=None):
        jac = self.jacobians(rs)
        n = np.cross(jac[..., 0], jac[..., 1])
        nl = np.linalg.norm(n, axis=-1, keepdims=True)
        if np.any(nl == 0):
            raise DegenerateElementError("zero-length normal")
        return n / nl

    def area_elements(self, rs=None):
        jac = self.jacobians(rs)
        return np.linalg.norm(np.cross(jac[..., 0], jac[..., 1]), axis=-1)

    # }}}

    # {{{ resolution measures

    def sample_points(self):
        return np.concatenate([self.ref.nodes, interior_sample_points()])

    def stretch_at(self, rs):
        return stretch_from_jacobian(self.jacobians(rs))

    @property
    def eta(self):
        """Per-element ``eta_k``: max over nodes plus 15 interior samples."""
        if "eta" not in self._cache:
            self._cache["eta"] = self.stretch_at(self.sample_points()).max(axis=1)
        return self._cache["eta"]

    def curvatures_at(self, rs=None):
        jac = self.jacobians(rs)
        return curvatures_from_derivatives(jac, *self.second_derivatives(rs))

    def scaled_curvature(self):
        """``max |k| * eta_k(x)`` per element over the interpolation nodes."""
        k1, k2 = self.curvatures_at()
        kmax = np.maximum(np.abs(k1), np.abs(k2))
        eta_x = stretch_from_jacobian(self.jacobians())
        return (kmax * eta_x).max(axis=1)

    # }}}

    def with_stage(self, stage):
        return replace(self, stage=stage, _cache={})


# {{{ single-element operations

def _element_disc(nodes, order):
    return SurfaceDiscretization(order, np.asarray(nodes, dtype=np.float64)[None])


def stretch_factor(element_nodes, ref_pt, order):
    """``eta(x) = 2 sigma_1`` at equilateral reference point ``ref_pt``."""
    rs = eq_to_biunit(np.atleast_2d(ref_pt))
    jac = _element_disc(element_nodes, order).jacobians(rs)[0, 0]
    if np.linalg.matrix_rank(jac) < 2:
        raise DegenerateElementError("degenerate mapping Jacobian")
    return float(stretch_from_jacobian(jac))


def principal_curvatures(element_nodes, ref_pt, order):
    if order < 2:
        raise ValueError("curvatures need mapping degree >= 2")
    rs = eq_to_biunit(np.atleast_2d(ref_pt))
    k1, k2 = _element_disc(element_nodes, order).curvatures_at(rs)
    return float(k1[0, 0]), float(k2[0, 0])

# }}}


# {{{ bisection and interpolation

def bisect(disc: SurfaceDiscretization, flags):
    """Replace each flagged element by its four midpoint children.

    Children are re-interpolated from the parent polynomial, so the union of
    the children reproduces the parent surface exactly.
    """
    flags = np.asarray(flags, dtype=bool)
    if flags.shape != (disc.nelements,):
        raise ValueError("flags must have one entry per element")
    if not flags.any():
        return disc
    ref = disc.ref
    new_nodes, roots, verts, parents = [], [], [], []
    child_rs = [affine_from_vertices(cv, ref.nodes) for cv in child_vertices(_REF_VERTS)]
    child_interp = [ref.interp_matrix(rs) for rs in child_rs]
    for k in range(disc.nelements):
        if not flags[k]:
            new_nodes.append(disc.nodes[k][None])
            roots.append(disc.root[k])
            verts.append(disc.ref_vertices[k][None])
            parents.append(k)
            continue
        for cv, im in zip(child_vertices(disc.ref_vertices[k]), child_interp):
            new_nodes.append((im @ disc.nodes[k])[None])
            roots.append(disc.root[k])
            verts.append(cv[None])
            parents.append(k)
    return SurfaceDiscretization(
        disc.order, np.concatenate(new_nodes), disc.stage,
        np.array(roots), np.concatenate(verts), np.array(parents))


def interpolate_to(disc: SurfaceDiscretization, values, rs):
    """Interpolate per-node ``values`` ``(K, Np[, ...])`` to reference points."""
    values = np.asarray(values)
    return np.einsum("pn,kn...->kp...", disc.ref.interp_matrix(rs), values)


@dataclass(frozen=True)
class QuadratureDiscretization:
    """Oversampled quadrature nodes on a stage-2 discretization."""

    base: SurfaceDiscretization
    quad_order: int
    ref_nodes: np.ndarray
    ref_weights: np.ndarray
    points: np.ndarray      # (K, nq, 3)
    weights: np.ndarray     # (K, nq), includes area element
    normals: np.ndarray     # (K, nq, 3)

    stage = "stage2quad"

    @property
    def nelements(self):
        return self.points.shape[0]

    @property
    def nnodes(self):
        return self.points.shape[0] * self.points.shape[1]

    def upsample(self, values):
        return upsample(self.base, values, self.quad_order)

    def flat(self):
        return self.points.reshape(-1, 3), self.weights.reshape(-1), self.normals.reshape(-1, 3)


def make_quadrature(disc: SurfaceDiscretization, quad_order):
    rs, w = quadrature_rule(quad_order)
    pts = disc.map_points(rs)
    jac = disc.jacobians(rs)
    cr = np.cross(jac[..., 0], jac[..., 1])
    area = np.linalg.norm(cr, axis=-1)
    if np.any(area == 0):
        raise DegenerateElementError("degenerate element at a quadrature node")
    return QuadratureDiscretization(disc, quad_order, rs, w, pts, w[None, :] * area, cr / area[..., None])


def upsample(disc: SurfaceDiscretization, values, quad_order, vdm_cond_max=1e6):
    """Interpolate node values ``(K, Np)`` (or flat) to the order-``quad_order`` rule nodes."""
    if disc.ref.condition_number() > vdm_cond_max:
        raise np.linalg.LinAlgError("ill-conditioned nodal Vandermonde")
    values = np.asarray(values, dtype=np.float64)
    values = values.reshape((disc.nelements, disc.ref.nnodes) + values.shape[1 if values.ndim == 1 else 2:])
    rs, _ = quadrature_rule(quad_order)
    return interpolate_to(disc, values, rs)

# }}}
