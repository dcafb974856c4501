"""Interaction lists for the target-confinement FMM.

For every box ``b`` that owns, or has descendants owning, targets or QBX
centers, the following source-box lists are built (only boxes whose
subtree contains sources are kept):

``U``        leaves in ``{b}`` and its descendants, and leaves adjacent to ``b``
``V``        same-level children of the parent's 2-colleagues, 2-well-separated from ``b``
``W``        descendants ``d`` of non-self 2-colleagues, not adjacent to ``b``,
             whose ancestors below the colleague are all adjacent to ``b``
``X``        leaves adjacent to ``Parent(b)`` but not to ``b`` at an ancestor's level,
             plus non-adjacent same-level 2-colleague leaves

``W`` is split into ``W_far`` (top-most boxes ``d`` with ``d < TCR(b)``) and
``W_close`` (leaves reached without such separation). ``X`` boxes of ``b``
and its ancestors are split into ``X_close`` (``TCR(b)`` not separated from
``d``) and ``X_far`` (newly separated at ``b``).
"""
from dataclasses import dataclass, field

import numpy as np

from .octree import SQRT3, TcrOctree

LIST_NAMES = ("U", "V", "W_close", "W_far", "X_close", "X_far")


# {{{ separation

def separated_box_vs_tcr(a_center, a_radius, b_center, b_radius, t_f, norm="l2"):
    """``a < TCR(b)``: distance from ``center(a)`` to the boundary of TCR(b) is >= ``3|a|``."""
    d = np.asarray(a_center, dtype=np.float64) - np.asarray(b_center, dtype=np.float64)
    if norm == "l2":
        return bool(np.sqrt(d @ d) - SQRT3 * b_radius * (1 + t_f) >= 3 * a_radius)
    return bool(np.abs(d).max() - b_radius * (1 + t_f) >= 3 * a_radius)


def separated_tcr_vs_box(a_center, a_radius, b_center, b_radius, t_f):
    """``TCR(a) < b``: l-inf distance from ``center(a)`` to ``b`` is >= ``3|a|(1+t_f)``."""
    d = np.asarray(a_center, dtype=np.float64) - np.asarray(b_center, dtype=np.float64)
    return bool(np.abs(d).max() - b_radius >= 3 * a_radius * (1 + t_f))


def adequately_separated(kind, tree: TcrOctree, a, b):
    c, r = tree.box_center, tree.box_radius
    if kind == "box_vs_tcr":
        return separated_box_vs_tcr(c[a], r[a], c[b], r[b], tree.t_f, tree.norm)
    if kind == "tcr_vs_box":
        return separated_tcr_vs_box(c[a], r[a], c[b], r[b], tree.t_f)
    raise ValueError(f"unknown separation kind {kind!r}")

# }}}


@dataclass
class InteractionLists:
    """Per-box lists, keyed by box id. Absent boxes have empty lists."""

    boxes: np.ndarray
    U: dict = field(default_factory=dict)
    V: dict = field(default_factory=dict)
    W: dict = field(default_factory=dict)
    X: dict = field(default_factory=dict)
    W_close: dict = field(default_factory=dict)
    W_far: dict = field(default_factory=dict)
    X_close: dict = field(default_factory=dict)
    X_far: dict = field(default_factory=dict)
    demote_threshold: float = None

    def get(self, name, b):
        return getattr(self, name).get(int(b), np.zeros(0, dtype=np.int64))

    def max_sizes(self):
        return {name: max((len(v) for v in getattr(self, name).values()), default=0)
                for name in LIST_NAMES + ("X",)}


def _lattice_dist(tree, a, b):
    return int(np.abs(tree.coords[a] - tree.coords[b]).max())


def target_boxes(tree: TcrOctree):
    """Boxes owning, or with descendants owning, targets or centers."""
    sub = tree.subtree_counts("target") + tree.subtree_counts("center")
    return np.flatnonzero(sub > 0)


def build_lists(tree: TcrOctree, demote_threshold=None):
    """Interaction lists by colleague traversal.

    Parameters
    ----------
    demote_threshold : float, optional
        If given, a ``W_far`` box whose subtree holds fewer sources than this
        is replaced by its source leaves in ``W_close`` (typically
        ``p_fmm**3 / p_qbx**2``).
    """
    has_src = tree.subtree_counts("source") > 0
    leaf = tree.is_leaf
    bc, br = tree.box_center, tree.box_radius
    out = InteractionLists(boxes=target_boxes(tree), demote_threshold=demote_threshold)
    nsrc_sub = tree.subtree_counts("source")

    def kids(x):
        ch = tree.children[x]
        return [int(c) for c in ch if c >= 0]

    active = out.boxes[np.argsort(tree.level[out.boxes], kind="stable")]
    for b in (int(x) for x in active):
        par = int(tree.parent[b])
        ancestors = tree.ancestors(b)

        # List 1
        U = set()
        if leaf[b]:
            U.add(b)
        else:
            U.update(int(x) for x in tree.leaf_descendants(b))
        stack = list(tree.neighbors(b, 1))
        while stack:
            x = stack.pop()
            if not has_src[x] or not tree.adjacent(x, b):
                continue
            if leaf[x]:
                U.add(x)
            else:
                stack.extend(kids(x))
        for a in ancestors:
            for x in tree.neighbors(a, 1):
                if leaf[x] and tree.adjacent(x, b):
                    U.add(x)
        U = sorted(x for x in U if has_src[x])

        # List 2
        V = []
        if par >= 0:
            for pc in [par] + tree.neighbors(par, 2):
                for x in kids(pc):
                    if has_src[x] and _lattice_dist(tree, x, b) > 2:
                        V.append(x)
        V.sort()

        # List 3
        W = []
        for c in tree.neighbors(b, 2):
            stack = kids(c)
            while stack:
                x = stack.pop()
                if not has_src[x]:
                    continue
                if not tree.adjacent(x, b):
                    W.append(x)
                elif not leaf[x]:
                    stack.extend(kids(x))
        W.sort()

        # List 4
        X = set()
        for x in tree.neighbors(b, 2):
            if leaf[x] and has_src[x] and not tree.adjacent(x, b):
                X.add(x)
        if par >= 0:
            for a in ancestors:
                for x in tree.neighbors(a, 1):
                    if leaf[x] and has_src[x] and tree.adjacent(x, par) and not tree.adjacent(x, b):
                        X.add(x)
        X = sorted(X)

        # List 3 close/far
        wc, wf = [], []
        stack = list(W)
        while stack:
            x = stack.pop()
            if separated_box_vs_tcr(bc[x], br[x], bc[b], br[b], tree.t_f, tree.norm):
                if demote_threshold is not None and nsrc_sub[x] < demote_threshold:
                    wc.extend(int(y) for y in tree.leaf_descendants(x, "source"))
                else:
                    wf.append(x)
            elif leaf[x]:
                wc.append(x)
            else:
                stack.extend(y for y in kids(x) if has_src[y])

        # List 4 close/far
        inherited = out.X_close.get(par, np.zeros(0, dtype=np.int64)) if par >= 0 else []
        xc, xf = [], []
        for x in X:
            (xf if separated_tcr_vs_box(bc[b], br[b], bc[x], br[x], tree.t_f) else xc).append(x)
        for x in inherited:
            x = int(x)
            (xf if separated_tcr_vs_box(bc[b], br[b], bc[x], br[x], tree.t_f) else xc).append(x)

        as_arr = lambda v: np.array(sorted(set(v)), dtype=np.int64)
        out.U[b] = as_arr(U)
        out.V[b] = as_arr(V)
        out.W[b] = as_arr(W)
        out.X[b] = as_arr(X)
        out.W_close[b] = as_arr(wc)
        out.W_far[b] = as_arr(wf)
        out.X_close[b] = as_arr(xc)
        out.X_far[b] = as_arr(xf)
    return out
