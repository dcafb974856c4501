"""Test geometries: icosahedral spheres and 'urchin' star-shaped surfaces."""
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar

from ..expansions.harmonics import _normalized_legendre
from .discretization import SurfaceDiscretization, affine_from_vertices, child_vertices
from .reference import reference_element

MAX_URCHIN_DEPTH = 12


class RefinementDidNotConverge(RuntimeError):
    def __init__(self, msg, elements=None):
        super().__init__(msg)
        self.elements = elements


def icosahedron():
    """Unit-circumradius icosahedron, faces oriented with outward normals."""
    t = (1 + 5**0.5) / 2
    v = np.array([[-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
                  [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
                  [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1]], dtype=np.float64)
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    f = np.array([[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
                  [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
                  [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
                  [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]])
    # orientation check against the centroid ray
    a, b, c = v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]
    flip = np.einsum("ij,ij->i", np.cross(b - a, c - a), a + b + c) < 0
    f[flip] = f[flip][:, [0, 2, 1]]
    return v, f


def _flat_faces(level):
    """Flat sub-triangles (F, 3, 3) of the level-``level`` icosahedral subdivision."""
    v, f = icosahedron()
    tris = v[f]
    for _ in range(level):
        tris = np.stack([c for t in tris for c in child_vertices(t)])
    return tris


def _flat_points(tris, rs):
    """Points of flat 3D triangles at bi-unit reference coordinates."""
    return np.stack([affine_from_vertices(t, rs) for t in tris])


def gen_sphere(radius=1.0, refinement_level=0, order=4):
    """Icosahedral sphere: ``20 * 4**level`` curved elements of degree ``order``."""
    tris = _flat_faces(refinement_level)
    flat = _flat_points(tris, reference_element(order).nodes)
    nodes = radius * flat / np.linalg.norm(flat, axis=-1, keepdims=True)
    return SurfaceDiscretization(order, nodes)


# {{{ urchin

@lru_cache(maxsize=None)
def urchin_range(k):
    """``(min, max)`` over the sphere of ``Re Y_k^m``, ``m = k // 2``."""
    m = k // 2

    def pbar(theta):
        return _normalized_legendre(k, np.cos(theta))[k, m]

    th = np.linspace(0, np.pi, 4001)
    vals = pbar(th)
    if m == 0:
        cands = []
        for sign in (1, -1):
            i = int(np.argmax(sign * vals))
            lo, hi = th[max(i - 1, 0)], th[min(i + 1, th.size - 1)]
            res = minimize_scalar(lambda t: -sign * pbar(t), bounds=(lo, hi), method="bounded",
                                  options={"xatol": 1e-14})
            cands.append(max(sign * vals[i], -res.fun) * sign)
        return float(cands[1]), float(cands[0])
    i = int(np.argmax(np.abs(vals)))
    lo, hi = th[max(i - 1, 0)], th[min(i + 1, th.size - 1)]
    res = minimize_scalar(lambda t: -abs(pbar(t)), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-14})
    top = max(abs(vals[i]), -res.fun)
    return -float(top), float(top)


def urchin_radius(k, xyz):
    """``r_k`` at directions ``xyz`` (normalized internally)."""
    xyz = np.asarray(xyz, dtype=np.float64)
    u = xyz / np.linalg.norm(xyz, axis=-1, keepdims=True)
    theta = np.arccos(np.clip(u[..., 2], -1, 1))
    phi = np.arctan2(u[..., 1], u[..., 0])
    m = k // 2
    re_y = _normalized_legendre(k, np.cos(theta))[k, m] * np.cos(m * phi)
    lo, hi = urchin_range(k)
    return 0.2 + (re_y - lo) / (hi - lo)


def urchin_map(k, flat_points):
    u = flat_points / np.linalg.norm(flat_points, axis=-1, keepdims=True)
    return urchin_radius(k, u)[..., None] * u


def tail_coefficient_ratio(disc: SurfaceDiscretization):
    """Per element: ||coeffs of the two top total degrees|| / ||all coeffs||."""
    ref = disc.ref
    modal = np.einsum("mn,knd->kmd", ref.vdm_inv, disc.nodes)
    top = ref.mode_degrees >= disc.order - 1
    tail = np.sqrt((modal[:, top] ** 2).sum(axis=(1, 2)))
    total = np.sqrt((modal ** 2).sum(axis=(1, 2)))
    return tail / total


def gen_urchin(k, coeff_tol=1e-10, order=8, max_depth=MAX_URCHIN_DEPTH):
    """Urchin ``gamma_k`` with adaptive bisection of the icosahedral base mesh.

    Elements whose two highest-total-degree modal coefficients carry at least
    ``coeff_tol`` of the coefficient norm are bisected and re-evaluated from
    the exact surface map.
    """
    if k < 1:
        raise ValueError("urchin index must be >= 1")
    ref = reference_element(order)
    tris = list(_flat_faces(0))
    for depth in range(max_depth + 1):
        flat = _flat_points(np.array(tris), ref.nodes)
        disc = SurfaceDiscretization(order, urchin_map(k, flat))
        marks = tail_coefficient_ratio(disc) >= coeff_tol
        if not marks.any():
            return disc
        if depth == max_depth:
            break
        new = []
        for t, mk in zip(tris, marks):
            new.extend(child_vertices(t) if mk else [t])
        tris = new
    raise RefinementDidNotConverge(
        f"urchin {k} not resolved to {coeff_tol:g} after {max_depth} bisection rounds",
        elements=np.flatnonzero(marks))

# }}}
