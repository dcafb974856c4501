"""Nine-stage QBX-aware FMM driver and the unaccelerated QBX oracle."""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..kernels import CoincidentPointError, SourceEnsemble, direct_sum
from ..tree.lists import build_lists
from ..tree.octree import build_tree
from .cost import CostLedger, modeled_flops
from .far import L2L, LOCAL, M2L, M2M, MULTIPOLE, eval_owned, form_at_centers, translate_pairs, zeros
from .near import ExpansionDomainError, qbx_direct

TF_MAX = 2 * np.sqrt(3) - 2


@dataclass(frozen=True)
class FmmConfig:
    """Parameters of the accelerated evaluation.

    ``demote_threshold="auto"`` uses ``p_fmm**3 / p_qbx**2``; ``None`` disables
    List-3 demotion. ``allow_low_fmm_order`` lifts the ``p_qbx <= p_fmm``
    requirement for order sweeps that start below ``p_qbx``.
    """

    p_fmm: int = 10
    p_qbx: int = 5
    t_f: float = 0.9
    n_max: int = 512
    demote_threshold: object = "auto"
    level_restrict: bool = False
    norm: str = "l2"
    allow_low_fmm_order: bool = False

    def __post_init__(self):
        if self.p_qbx > self.p_fmm and not self.allow_low_fmm_order:
            raise ValueError("p_qbx must not exceed p_fmm")
        if not 0 <= self.t_f < TF_MAX:
            raise ValueError(f"t_f must lie in [0, {TF_MAX:.4f})")
        if self.p_qbx < 0 or self.n_max < 1:
            raise ValueError("invalid order or n_max")

    @property
    def demotion(self):
        if self.demote_threshold == "auto":
            return self.p_fmm ** 3 / max(self.p_qbx, 1) ** 2
        return self.demote_threshold


@dataclass(frozen=True)
class Density:
    """Single- and double-layer densities sampled at the quadrature nodes."""

    single: Optional[np.ndarray] = None
    double: Optional[np.ndarray] = None


@dataclass(frozen=True)
class GeometryBundle:
    """Everything the evaluators need besides the density.

    Attributes
    ----------
    source_positions, source_normals : (N, 3) arrays
    source_weights : (N,) array, quadrature weight times area element
    center_positions : (C, 3) array
    center_radii : (C,) array
    targets : (M, 3) array
    target_center : (M,) int array, ``-1`` for conventional targets
    flagged : (F,) int array, endangered targets without a center
    """

    source_positions: np.ndarray
    source_normals: np.ndarray
    source_weights: np.ndarray
    center_positions: np.ndarray
    center_radii: np.ndarray
    targets: np.ndarray
    target_center: np.ndarray
    flagged: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @classmethod
    def from_pipeline(cls, result, targets, association):
        pos, w, nrm = result.quad.flat()
        return cls(pos, nrm, w, result.centers.positions, result.centers.radii,
                   np.ascontiguousarray(targets, dtype=np.float64), association.center,
                   association.flagged)

    def sources(self, density: Density) -> SourceEnsemble:
        w = self.source_weights
        weights = w * density.single if density.single is not None else np.zeros_like(w)
        dip = None
        if density.double is not None:
            dip = (w * density.double)[:, None] * self.source_normals
        return SourceEnsemble(self.source_positions, weights, dip)

    def check(self):
        if self.flagged.size:
            raise ValueError(f"{self.flagged.size} endangered targets have no center "
                             f"(first: {int(self.flagged[0])})")


def _is_zero(src: SourceEnsemble):
    return not np.any(src.weights) and (src.dipole_moments is None or not np.any(src.dipole_moments))


# {{{ oracle

def direct_qbx(bundle: GeometryBundle, density: Density, p_qbx):
    """O(N M) reference: every associated target sees every source through its center."""
    bundle.check()
    src = bundle.sources(density)
    out = np.zeros(bundle.targets.shape[0])
    assoc = np.flatnonzero(bundle.target_center >= 0)
    conv = np.flatnonzero(bundle.target_center < 0)
    if assoc.size:
        vals = qbx_direct(src.positions, src.weights, src.dipole_moments, bundle.targets[assoc],
                          bundle.center_positions[bundle.target_center[assoc]], p_qbx)
        out[assoc] = vals
    if conv.size:
        out[conv] = direct_sum(src, bundle.targets[conv])
    return out

# }}}


# {{{ accelerated evaluation

@dataclass
class FmmResult:
    potential: np.ndarray
    ledger: CostLedger
    tree: object = None
    lists: object = None


def build_geometry_tree(bundle: GeometryBundle, cfg: FmmConfig):
    """Octree over sources, active centers and conventional targets."""
    active = np.unique(bundle.target_center[bundle.target_center >= 0])
    conv = np.flatnonzero(bundle.target_center < 0)
    tree = build_tree(bundle.source_positions, bundle.targets[conv], bundle.center_positions[active],
                      bundle.center_radii[active], n_max=cfg.n_max, t_f=cfg.t_f, norm=cfg.norm,
                      level_restrict=cfg.level_restrict)
    lists = build_lists(tree, cfg.demotion)
    return tree, lists, active, conv


def execute(bundle: GeometryBundle, density: Density, cfg: FmmConfig = FmmConfig(), geometry=None):
    """Accelerated QBX evaluation of the layer potential at ``bundle.targets``.

    Parameters
    ----------
    geometry : tuple, optional
        Output of :func:`build_geometry_tree`, for reuse across densities.

    Returns
    -------
    FmmResult
    """
    bundle.check()
    src = bundle.sources(density)
    m = bundle.targets.shape[0]
    if geometry is None:
        geometry = build_geometry_tree(bundle, cfg)
    tree, lists, active, conv = geometry
    out = np.zeros(m)
    if _is_zero(src):
        return FmmResult(out, CostLedger(), tree, lists)
    ledger = modeled_flops(lists, tree, cfg.p_fmm, cfg.p_qbx)

    p, q = cfg.p_fmm, cfg.p_qbx
    pos, w = src.positions, src.weights
    dip = src.dipole_moments
    nb = tree.nboxes
    bctr = tree.box_center
    cpos = bundle.center_positions[active]
    # associated targets grouped by (tree-local) center id
    local_id = np.full(bundle.center_positions.shape[0], -1, dtype=np.int64)
    local_id[active] = np.arange(active.size)
    assoc = np.flatnonzero(bundle.target_center >= 0)
    t_center = local_id[bundle.target_center[assoc]]
    order = np.argsort(t_center, kind="stable")
    t_starts = np.searchsorted(t_center[order], np.arange(active.size + 1))

    def center_targets(cids):
        if cids.size == 0:
            return np.zeros(0, dtype=np.int64)
        return np.concatenate([order[t_starts[c]:t_starts[c + 1]] for c in cids])

    has_src = tree.subtree_counts("source") > 0
    src_ids = [tree.owned("source", b) for b in range(nb)]

    # Stage 2: multipoles, leaves up
    mpole = zeros(nb, p)
    for b in range(nb):
        if src_ids[b].size:
            form_at_centers(MULTIPOLE, pos, w, dip, src_ids[b], bctr[b:b + 1], p, mpole[b:b + 1])
    for b in tree.boxes_by_level_desc():
        par = tree.parent[b]
        if par >= 0 and has_src[b]:
            translate_pairs(M2M, mpole, bctr, bctr, [[b, par]], p, p, mpole)

    qbx_local = zeros(active.size, q)
    box_local = zeros(nb, p)
    qbx_near = np.zeros(assoc.size)
    conv_pot = np.zeros(conv.size)

    for b in (int(x) for x in lists.boxes):
        cids = tree.owned("center", b)
        tloc = center_targets(cids)            # positions in assoc
        tconv = tree.owned("target", b)        # indices into conv
        # Stages 3, 5 (close), 6 (close): direct interactions
        near = [lists.get(n, b) for n in ("U", "W_close", "X_close")]
        near = np.concatenate(near)
        if near.size:
            ids = np.concatenate([src_ids[x] for x in near])
            if tloc.size:
                try:
                    qbx_near[tloc] += qbx_direct(pos[ids], w[ids], None if dip is None else dip[ids],
                                                 bundle.targets[assoc[tloc]], cpos[t_center[tloc]], q)
                except ExpansionDomainError as exc:
                    raise ExpansionDomainError(f"box {b}: {exc}") from exc
            if tconv.size:
                sub = SourceEnsemble(pos[ids], w[ids], None if dip is None else dip[ids])
                try:
                    conv_pot[tconv] += direct_sum(sub, tree.targets[tconv])
                except CoincidentPointError as exc:
                    raise ExpansionDomainError(f"box {b}: conventional target coincides with a source") from exc
        # Stage 4: M2L
        V = lists.get("V", b)
        if V.size:
            translate_pairs(M2L, mpole, bctr, bctr, np.stack([V, np.full(V.size, b)], 1), p, p, box_local)
        # Stage 5 (far): multipole to QBX local / to conventional targets
        Wf = lists.get("W_far", b)
        if Wf.size:
            if cids.size:
                pairs = np.stack(np.meshgrid(Wf, cids, indexing="ij"), -1).reshape(-1, 2)
                translate_pairs(M2L, mpole, bctr, cpos, pairs, p, q, qbx_local)
            if tconv.size:
                tmp = np.zeros(tconv.size)
                for x in Wf:
                    eval_owned(MULTIPOLE, mpole, bctr, np.full(tconv.size, x), tree.targets[tconv], p, tmp)
                conv_pot[tconv] += tmp
        # Stage 6 (far): sources to box local
        Xf = lists.get("X_far", b)
        if Xf.size:
            ids = np.concatenate([src_ids[x] for x in Xf])
            form_at_centers(LOCAL, pos, w, dip, ids, bctr[b:b + 1], p, box_local[b:b + 1])

    # Stage 7: locals downward
    target_set = np.zeros(nb, dtype=bool)
    target_set[lists.boxes] = True
    for b in np.argsort(tree.level, kind="stable"):
        par = tree.parent[b]
        if par >= 0 and target_set[b] and target_set[par]:
            translate_pairs(L2L, box_local, bctr, bctr, [[par, b]], p, p, box_local)

    # Stage 8: box locals to QBX centers
    if active.size:
        cbox = tree.center_box
        translate_pairs(L2L, box_local, bctr, cpos, np.stack([cbox, np.arange(active.size)], 1), p, q,
                        qbx_local)

    # Stage 9: evaluation
    if assoc.size:
        vals = qbx_near.copy()
        eval_owned(LOCAL, qbx_local, cpos, t_center, bundle.targets[assoc], q, vals)
        out[assoc] = vals
    if conv.size:
        eval_owned(LOCAL, box_local, bctr, tree.target_box, tree.targets, p, conv_pot)
        out[conv] = conv_pot
    return FmmResult(out, ledger, tree, lists)

# }}}
