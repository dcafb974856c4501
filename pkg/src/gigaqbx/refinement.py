"""Refinement pipeline: stage-1/stage-2 refinement, center placement,
quadrature construction and target association.

Centers are stored interleaved: center ``2 i`` is the interior (``side=-1``)
and ``2 i + 1`` the exterior (``side=+1``) center of stage-1 node ``i``.
"""
import json
from dataclasses import dataclass, field
from math import ceil, log
from typing import Optional

import numpy as np

from .kernels import SourceEnsemble
from .mesh.discretization import (DegenerateElementError, QuadratureDiscretization,
                                  SurfaceDiscretization, bisect, make_quadrature)
from .mesh.generators import RefinementDidNotConverge
from .tree.octree import build_tree

_QUERY_NMAX = 64


@dataclass(frozen=True)
class RefinementConfig:
    eps_d: float = 0.025
    c_kappa: float = 0.8
    eps_ta: float = 0.05
    max_iterations: int = 30

    def __post_init__(self):
        if not 0 <= self.eps_d < 1:
            raise ValueError("eps_d must lie in [0, 1)")
        if self.c_kappa <= 0 or self.eps_ta < 0 or self.max_iterations < 1:
            raise ValueError("invalid refinement parameters")


@dataclass(frozen=True)
class CenterSet:
    """Two expansion centers per stage-1 node.

    Attributes
    ----------
    positions : (2N, 3) array
    radii : (2N,) array
    side : (2N,) int array, ``-1`` interior, ``+1`` exterior
    element : (2N,) int array, stage-1 element that spawned the center
    node : (2N,) int array, flat stage-1 node index
    """

    positions: np.ndarray
    radii: np.ndarray
    side: np.ndarray
    element: np.ndarray
    node: np.ndarray

    def __len__(self):
        return self.positions.shape[0]

    def subset(self, ids):
        return CenterSet(self.positions[ids], self.radii[ids], self.side[ids],
                         self.element[ids], self.node[ids])


@dataclass
class RefinementReport:
    stage1_marks: list = field(default_factory=list)
    stage1_interference_marks: list = field(default_factory=list)
    stage1_curvature_marks: list = field(default_factory=list)
    stage2_marks: list = field(default_factory=list)
    stage2_monotone: bool = True
    counts: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps(self.__dict__, indent=2, sort_keys=True)


def _query_tree(points):
    return build_tree(points, n_max=_QUERY_NMAX)


# {{{ centers

def place_centers(disc: SurfaceDiscretization) -> CenterSet:
    """``c = x -/+ r n(x)`` at every node with ``r = eta_k / 2``."""
    try:
        nrm = disc.normals().reshape(-1, 3)
    except DegenerateElementError as exc:
        raise DegenerateElementError("zero-length normal while placing centers") from exc
    x = disc.points
    elem = disc.element_of_node()
    r = disc.eta[elem] / 2
    if np.any(r <= 0):
        raise DegenerateElementError("non-positive expansion radius")
    n = x.shape[0]
    pos = np.empty((2 * n, 3))
    pos[0::2] = x - r[:, None] * nrm
    pos[1::2] = x + r[:, None] * nrm
    side = np.tile(np.array([-1, 1]), n)
    return CenterSet(pos, np.repeat(r, 2), side, np.repeat(elem, 2), np.repeat(np.arange(n), 2))

# }}}


# {{{ stage 1

def interference_flags(disc, centers, eps_d):
    """Elements whose centers have a node strictly inside ``(1 - eps_d) r``."""
    tree = _query_tree(disc.points)
    hits = tree.particles_in_ball("source", centers.positions, (1 - eps_d) * centers.radii, strict=True)
    flags = np.zeros(disc.nelements, dtype=bool)
    for c, h in enumerate(hits):
        if h.size:
            flags[centers.element[c]] = True
    return flags


def curvature_flags(disc, c_kappa):
    if disc.order < 2:
        return np.zeros(disc.nelements, dtype=bool)
    return disc.scaled_curvature() > c_kappa


def stage1_refine(disc: SurfaceDiscretization, eps_d=0.025, c_kappa=0.8, max_iterations=30,
                  report: Optional[RefinementReport] = None):
    """Bisect until expansion balls are clear of the surface and curvature is resolved.

    Returns
    -------
    disc : SurfaceDiscretization (stage ``"stage1"``)
    centers : CenterSet
    """
    report = report if report is not None else RefinementReport()
    disc = disc.with_stage("stage1")
    for _ in range(max_iterations):
        centers = place_centers(disc)
        fi = interference_flags(disc, centers, eps_d)
        fc = curvature_flags(disc, c_kappa)
        flags = fi | fc
        report.stage1_interference_marks.append(int(fi.sum()))
        report.stage1_curvature_marks.append(int(fc.sum()))
        report.stage1_marks.append(int(flags.sum()))
        if not flags.any():
            return disc, centers
        disc = bisect(disc, flags)
    centers = place_centers(disc)
    flags = interference_flags(disc, centers, eps_d) | curvature_flags(disc, c_kappa)
    if flags.any():
        raise RefinementDidNotConverge(
            f"stage-1 refinement exceeded {max_iterations} iterations", np.flatnonzero(flags))
    return disc, centers

# }}}


# {{{ stage 2

def _criterion_points(disc):
    """Nodes plus interior samples of each element: ``(K, npts, 3)``."""
    return disc.map_points(disc.sample_points())


def stage2_flags(disc, centers):
    pts = _criterion_points(disc)
    k, npts, _ = pts.shape
    radii = np.repeat(3 / 8 * disc.eta, npts)
    tree = build_tree(np.zeros((0, 3)), centers=centers.positions, n_max=_QUERY_NMAX,
                      center_radii=None)
    hits = tree.particles_in_ball("center", pts.reshape(-1, 3), radii, strict=True)
    flags = np.zeros(k, dtype=bool)
    for q, h in enumerate(hits):
        if h.size:
            flags[q // npts] = True
    return flags


def stage2_refine(disc1: SurfaceDiscretization, centers: CenterSet, max_iterations=30,
                  report: Optional[RefinementReport] = None):
    """Bisect a copy of the stage-1 mesh until every center keeps ``(3/8) eta`` clearance.

    Centers are not modified.
    """
    report = report if report is not None else RefinementReport()
    disc = disc1.with_stage("stage2")
    prev = None
    for _ in range(max_iterations):
        flags = stage2_flags(disc, centers)
        report.stage2_marks.append(int(flags.sum()))
        if prev is not None and flags.any():
            # every newly marked element must descend from a previously marked one
            if not np.all(prev[disc.parent[flags]]):
                report.stage2_monotone = False
        if not flags.any():
            return disc
        prev = flags
        disc = bisect(disc, flags)
    flags = stage2_flags(disc, centers)
    if flags.any():
        raise RefinementDidNotConverge(
            f"stage-2 refinement exceeded {max_iterations} iterations", np.flatnonzero(flags))
    return disc

# }}}


# {{{ quadrature

def quad_order_for_digits(eps, c_prime=1.0):
    """Smallest ``Q`` with ``c_prime * (2/3)**Q <= eps``."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    return max(1, int(ceil(log(eps / c_prime) / log(2 / 3) - 1e-12)))


def build_quadrature(disc2: SurfaceDiscretization, quad_order):
    """Oversampled quadrature plus a density-to-source converter.

    The returned ``make_sources(density=None, dipole_density=None, at="nodes")``
    takes densities sampled on the stage-2 nodes (``at="nodes"``, upsampled by
    interpolation) or already on the quadrature nodes (``at="quad"``), and
    returns a :class:`SourceEnsemble` with weights ``w_q * J * density`` and
    dipole moments ``w_q * J * dipole_density * n``.
    """
    quad = make_quadrature(disc2.with_stage("stage2"), quad_order)
    pts, w, nrm = quad.flat()

    def resample(values, at):
        if values is None:
            return None
        values = np.asarray(values, dtype=np.float64)
        if at == "quad":
            return values.reshape(-1)
        if at == "nodes":
            return quad.upsample(values).reshape(-1)
        raise ValueError("at must be 'nodes' or 'quad'")

    def make_sources(density=None, dipole_density=None, at="nodes"):
        sig = resample(density, at)
        mu = resample(dipole_density, at)
        weights = w * sig if sig is not None else np.zeros_like(w)
        dip = (w * mu)[:, None] * nrm if mu is not None else None
        return SourceEnsemble(pts, weights, dip)

    return quad, make_sources

# }}}


# {{{ association

@dataclass(frozen=True)
class AssociationResult:
    """Target-to-center map.

    Attributes
    ----------
    center : (M,) int array, ``-1`` where not associated
    endangered : (M,) bool array
    flagged : (F,) int array, endangered targets without a center
    distance : (M,) array, target-center distance (``nan`` if none)
    """

    center: np.ndarray
    endangered: np.ndarray
    flagged: np.ndarray
    distance: np.ndarray

    @property
    def associated(self):
        return np.flatnonzero(self.center >= 0)


def associate_targets(targets, sources, source_eta, centers: CenterSet, eps_ta=0.05,
                      side_pref=None):
    """Match endangered targets to the nearest admissible center.

    Parameters
    ----------
    targets : (M, 3) array
    sources : (N, 3) array
        Source points, each with the danger-zone radius ``source_eta / 2``.
    source_eta : (N,) array
        ``eta_k`` of the element holding each source.
    side_pref : None, int or (M,) int array
        Restrict to centers with this ``side`` (``0`` means either).
    """
    targets = np.ascontiguousarray(targets, dtype=np.float64).reshape(-1, 3)
    m = targets.shape[0]
    sources = np.asarray(sources, dtype=np.float64).reshape(-1, 3)
    src_r = np.broadcast_to(np.asarray(source_eta, dtype=np.float64), sources.shape[:1]) / 2
    if side_pref is None:
        side_pref = 0
    pref = np.broadcast_to(np.asarray(side_pref, dtype=np.int64), (m,))

    ttree = build_tree(np.zeros((0, 3)), targets=targets, n_max=_QUERY_NMAX)
    endangered = np.zeros(m, dtype=bool)
    if sources.shape[0]:
        for h in ttree.particles_in_ball("target", sources, src_r):
            endangered[h] = True

    best = np.full(m, -1, dtype=np.int64)
    dist = np.full(m, np.inf)
    if len(centers):
        lim = centers.radii * (1 + eps_ta)
        hits = ttree.particles_in_ball("target", centers.positions, lim)
        # centers in increasing id order, strict improvement: ties keep the lowest id
        for c, h in enumerate(hits):
            h = h[endangered[h]]
            if not h.size:
                continue
            ok = (pref[h] == 0) | (pref[h] == centers.side[c])
            h = h[ok]
            d = np.linalg.norm(targets[h] - centers.positions[c], axis=1)
            better = d < dist[h]
            dist[h[better]] = d[better]
            best[h[better]] = c
    dist[best < 0] = np.nan
    flagged = np.flatnonzero(endangered & (best < 0))
    return AssociationResult(best, endangered, flagged, dist)

# }}}


# {{{ full pipeline

@dataclass(frozen=True)
class PipelineResult:
    stage1: SurfaceDiscretization
    stage2: SurfaceDiscretization
    centers: CenterSet
    quad: QuadratureDiscretization
    make_sources: object
    report: RefinementReport


def run_pipeline(disc, quad_order, cfg: RefinementConfig = RefinementConfig()):
    report = RefinementReport()
    d1, centers = stage1_refine(disc, cfg.eps_d, cfg.c_kappa, cfg.max_iterations, report)
    d2 = stage2_refine(d1, centers, cfg.max_iterations, report)
    quad, make_sources = build_quadrature(d2, quad_order)
    report.counts = {
        "stage1_elements": d1.nelements, "stage1_nodes": d1.nnodes,
        "stage2_elements": d2.nelements, "stage2_nodes": d2.nnodes,
        "quad_nodes": quad.nnodes, "centers": len(centers),
    }
    return PipelineResult(d1, d2, centers, quad, make_sources, report)


def surface_targets(result: PipelineResult, two_sided=True):
    """On-surface targets at the stage-1 nodes, with matching side preferences.

    With ``two_sided`` every node appears twice (``side_pref`` -1 then +1).
    """
    x = result.stage1.points
    if not two_sided:
        return x.copy(), np.zeros(x.shape[0], dtype=np.int64)
    return np.repeat(x, 2, axis=0), np.tile(np.array([-1, 1]), x.shape[0])


def associate_surface(result: PipelineResult, targets, side_pref, eps_ta=0.05):
    q = result.quad
    eta_src = np.repeat(q.base.eta, q.points.shape[1])
    return associate_targets(targets, q.points.reshape(-1, 3), eta_src, result.centers, eps_ta, side_pref)

# }}}
