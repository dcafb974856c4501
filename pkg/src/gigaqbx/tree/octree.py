"""Adaptive octree with target confinement, peer boxes and area queries.

Boxes live on a dyadic lattice: a box at level ``l`` with integer index
``(i, j, k)`` spans ``lo + [i, i+1] * h_l`` per axis with
``h_l = 2 * root_radius / 2**l``. All adjacency and colleague tests use
these integers, so they are exact.

Particles have three roles: sources, conventional targets, and QBX centers.
Sources and targets always descend to leaves. A center with radius ``r``
moves into the child containing it only if its ball fits that child's
target confinement region (TCR); otherwise it stays *suspended* in the
parent. With ``center_radii=None`` centers are treated as points.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

MAX_DEPTH = 64
SQRT3 = np.sqrt(3.0)


class TreeDepthError(RuntimeError):
    pass


def _csr(owner, nboxes):
    order = np.argsort(owner, kind="stable")
    starts = np.zeros(nboxes + 1, dtype=np.int64)
    np.add.at(starts, owner + 1, 1)
    return np.cumsum(starts), order


@dataclass
class TcrOctree:
    root_center: np.ndarray
    root_radius: float
    level: np.ndarray            # (nb,)
    coords: np.ndarray           # (nb, 3) lattice index at the box's level
    parent: np.ndarray           # (nb,), -1 for root
    children: np.ndarray         # (nb, 8), -1 where absent
    sources: np.ndarray
    targets: np.ndarray
    centers: np.ndarray
    center_radii: Optional[np.ndarray]
    source_box: np.ndarray
    target_box: np.ndarray
    center_box: np.ndarray
    t_f: float
    n_max: int
    norm: str = "l2"
    _cache: dict = field(default_factory=dict, repr=False)

    # {{{ geometry

    @property
    def nboxes(self):
        return self.level.shape[0]

    @property
    def nlevels(self):
        return int(self.level.max()) + 1

    @property
    def box_radius(self):
        return self.root_radius / 2.0 ** self.level

    @property
    def box_center(self):
        if "center" not in self._cache:
            h = 2 * self.box_radius
            lo = self.root_center - self.root_radius
            self._cache["center"] = lo + (self.coords + 0.5) * h[:, None]
        return self._cache["center"]

    @property
    def is_leaf(self):
        return np.all(self.children < 0, axis=1)

    @property
    def leaves(self):
        return np.flatnonzero(self.is_leaf)

    def tcr_radius(self, boxes=None):
        r = self.box_radius if boxes is None else self.box_radius[boxes]
        if self.norm == "l2":
            return SQRT3 * r * (1 + self.t_f)
        return r * (1 + self.t_f)

    # }}}

    # {{{ ownership

    def _points(self, role):
        return {"source": self.sources, "target": self.targets, "center": self.centers}[role]

    def _owned(self, role):
        key = "own_" + role
        if key not in self._cache:
            owner = getattr(self, role + "_box")
            self._cache[key] = _csr(owner, self.nboxes)
        return self._cache[key]

    def owned(self, role, box):
        starts, order = self._owned(role)
        return order[starts[box]:starts[box + 1]]

    def owned_counts(self, role):
        starts, _ = self._owned(role)
        return np.diff(starts)

    def subtree_counts(self, role):
        key = "sub_" + role
        if key not in self._cache:
            cnt = self.owned_counts(role).copy()
            for b in self.boxes_by_level_desc():
                if self.parent[b] >= 0:
                    cnt[self.parent[b]] += cnt[b]
            self._cache[key] = cnt
        return self._cache[key]

    def boxes_by_level_desc(self):
        return np.argsort(-self.level, kind="stable")

    def suspended_centers(self):
        """Ids of centers owned by non-leaf boxes."""
        return np.flatnonzero(~self.is_leaf[self.center_box])

    def leaf_descendants(self, b, role=None):
        key = ("leafdesc", int(b))
        if key not in self._cache:
            out, stack = [], [b]
            while stack:
                x = stack.pop()
                ch = self.children[x]
                ch = ch[ch >= 0]
                if ch.size == 0:
                    out.append(x)
                else:
                    stack.extend(ch[::-1].tolist())
            self._cache[key] = np.array(sorted(out), dtype=np.int64)
        res = self._cache[key]
        if role is not None:
            res = res[self.owned_counts(role)[res] > 0]
        return res

    def ancestors(self, b):
        out = []
        b = self.parent[b]
        while b >= 0:
            out.append(int(b))
            b = self.parent[b]
        return out

    # }}}

    # {{{ lattice relations

    def box_by_coords(self):
        if "lookup" not in self._cache:
            self._cache["lookup"] = {
                (int(l), int(c[0]), int(c[1]), int(c[2])): i
                for i, (l, c) in enumerate(zip(self.level, self.coords))}
        return self._cache["lookup"]

    def extent(self, b, level):
        """Integer extent ``(lo, hi)`` of box ``b`` measured in level-``level`` units."""
        s = 1 << (level - int(self.level[b]))
        lo = self.coords[b].astype(np.int64) * s
        return lo, lo + s

    def adjacent(self, a, b):
        """Closed boxes touch while their interiors are disjoint."""
        L = int(max(self.level[a], self.level[b]))
        alo, ahi = self.extent(a, L)
        blo, bhi = self.extent(b, L)
        touch = np.all((alo <= bhi) & (blo <= ahi))
        overlap = np.all((alo < bhi) & (blo < ahi))
        return bool(touch and not overlap)

    def neighbors(self, b, k):
        """Existing same-level boxes within lattice distance ``k`` (excluding ``b``)."""
        lk = self.box_by_coords()
        l = int(self.level[b])
        n = 1 << l
        ci = self.coords[b]
        out = []
        rng = range(-k, k + 1)
        for dx in rng:
            x = ci[0] + dx
            if x < 0 or x >= n:
                continue
            for dy in rng:
                y = ci[1] + dy
                if y < 0 or y >= n:
                    continue
                for dz in rng:
                    z = ci[2] + dz
                    if z < 0 or z >= n or (dx == 0 and dy == 0 and dz == 0):
                        continue
                    j = lk.get((l, int(x), int(y), int(z)))
                    if j is not None:
                        out.append(j)
        return sorted(out)

    # }}}

    # {{{ peers and area queries

    def peers(self, b):
        """Peer boxes of ``b``: adjacent-or-self, at least as large, minimal."""
        key = ("peers", int(b))
        if key in self._cache:
            return self._cache[key]
        lb = int(self.level[b])
        out = []

        def qualifies(x):
            return x == b or (self.level[x] <= lb and self.adjacent(x, b))

        def contains(x):
            lo, hi = self.extent(x, lb)
            return np.all((lo <= self.coords[b]) & (self.coords[b] < hi))

        stack = [0]
        while stack:
            x = stack.pop()
            if qualifies(x):
                kids = [c for c in self.children[x] if c >= 0 and self.level[c] <= lb and qualifies(c)]
                if kids:
                    stack.extend(kids)
                else:
                    out.append(int(x))
            elif self.level[x] < lb and contains(x):
                stack.extend(int(c) for c in self.children[x] if c >= 0)
        res = np.array(sorted(out), dtype=np.int64)
        self._cache[key] = res
        return res

    def guiding_box(self, c, r):
        b = 0
        rad = self.root_radius
        while True:
            if rad < r <= 2 * rad:
                return b
            ctr = self.box_center[b]
            octant = int(c[0] >= ctr[0]) | (int(c[1] >= ctr[1]) << 1) | (int(c[2] >= ctr[2]) << 2)
            ch = self.children[b, octant]
            if ch < 0:
                return b
            b = ch
            rad /= 2

    def _peer_leaves(self, b):
        key = ("peerleaves", int(b))
        if key not in self._cache:
            ls = [self.leaf_descendants(p) for p in self.peers(b)]
            self._cache[key] = np.unique(np.concatenate(ls)) if ls else np.zeros(0, np.int64)
        return self._cache[key]

    def area_query(self, c, r):
        """Leaves intersecting the closed cube of half-width ``r`` about ``c``."""
        c = np.asarray(c, dtype=np.float64)
        cand = self._peer_leaves(self.guiding_box(c, r))
        ctr = self.box_center[cand]
        rad = self.box_radius[cand]
        hit = np.all(np.abs(ctr - c) <= (r + rad)[:, None], axis=1)
        return cand[hit]

    def area_query_bruteforce(self, c, r):
        lv = self.leaves
        hit = np.all(np.abs(self.box_center[lv] - c) <= (r + self.box_radius[lv])[:, None], axis=1)
        return lv[hit]

    def area_query_many(self, points, radii):
        """Batched area queries; yields ``(query_ids, candidate_leaves)`` groups.

        Queries sharing a guiding box share their candidate leaf set; the
        caller filters particles exactly against each query.
        """
        points = np.asarray(points, dtype=np.float64)
        radii = np.broadcast_to(np.asarray(radii, dtype=np.float64), points.shape[:1])
        guides = self._guiding_boxes_vec(points, radii)
        order = np.argsort(guides, kind="stable")
        bounds = np.flatnonzero(np.diff(guides[order])) + 1
        for grp in np.split(order, bounds):
            if grp.size:
                yield grp, self._peer_leaves(guides[grp[0]])

    def _guiding_boxes_vec(self, points, radii):
        nq = points.shape[0]
        box = np.zeros(nq, dtype=np.int64)
        active = np.ones(nq, dtype=bool)
        rad = np.full(nq, self.root_radius)
        while active.any():
            idx = np.flatnonzero(active)
            stop = (rad[idx] < radii[idx]) & (radii[idx] <= 2 * rad[idx])
            ctr = self.box_center[box[idx]]
            p = points[idx]
            octant = ((p[:, 0] >= ctr[:, 0]).astype(np.int64)
                      | ((p[:, 1] >= ctr[:, 1]).astype(np.int64) << 1)
                      | ((p[:, 2] >= ctr[:, 2]).astype(np.int64) << 2))
            ch = self.children[box[idx], octant]
            done = stop | (ch < 0)
            active[idx[done]] = False
            go = idx[~done]
            box[go] = ch[~done]
            rad[go] /= 2
        return box

    def particles_in_ball(self, role, points, radii, metric="l2", strict=False):
        """For each query ``i``, ids of ``role`` particles within ``radii[i]`` of ``points[i]``.

        Candidates come from area queries (the cube of half-width ``radii[i]``
        contains the ball). Returns a list of sorted id arrays.
        """
        pts = self._points(role)
        starts, order = self._owned(role)
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        radii = np.broadcast_to(np.asarray(radii, dtype=np.float64), points.shape[:1])
        out = [None] * len(points)
        for grp, leaves in self.area_query_many(points, radii):
            if leaves.size:
                ids = np.concatenate([order[starts[l]:starts[l + 1]] for l in leaves])
            else:
                ids = np.zeros(0, dtype=np.int64)
            ids.sort()
            cand = pts[ids]
            # bounded-size blocks of the query x candidate distance matrix
            step = max(1, 2_000_000 // max(ids.size, 1))
            for s0 in range(0, grp.size, step):
                qs = grp[s0:s0 + step]
                d = cand[None, :, :] - points[qs][:, None, :]
                if metric == "l2":
                    dist = np.sqrt(np.einsum("qij,qij->qi", d, d))
                else:
                    dist = np.abs(d).max(axis=2)
                lim = radii[qs][:, None]
                hit = dist < lim if strict else dist <= lim
                for row, q in enumerate(qs):
                    out[q] = ids[hit[row]]
        return out

    # }}}

    def dump(self):
        """JSON-serializable description for debugging."""
        ns = self.owned_counts("source")
        nt = self.owned_counts("target")
        nc = self.owned_counts("center")
        leaf = self.is_leaf
        return {
            "root_center": self.root_center.tolist(),
            "root_radius": float(self.root_radius),
            "t_f": self.t_f, "n_max": self.n_max, "norm": self.norm,
            "boxes": [
                {"id": i, "level": int(self.level[i]), "center": self.box_center[i].tolist(),
                 "radius": float(self.box_radius[i]), "parent": int(self.parent[i]),
                 "children": [int(c) for c in self.children[i] if c >= 0],
                 "n_sources": int(ns[i]), "n_targets": int(nt[i]), "n_centers": int(nc[i]),
                 "suspended_centers": int(nc[i]) if not leaf[i] else 0}
                for i in range(self.nboxes)],
        }


def _root_cube(sources, targets, centers, radii):
    pts = [a for a in (sources, targets) if a.shape[0]]
    lo_hi = [(a.min(axis=0), a.max(axis=0)) for a in pts]
    if centers.shape[0]:
        r = radii if radii is not None else np.zeros(centers.shape[0])
        lo_hi.append(((centers - r[:, None]).min(axis=0), (centers + r[:, None]).max(axis=0)))
    if not lo_hi:
        return np.zeros(3), 1.0
    lo = np.min([a for a, _ in lo_hi], axis=0)
    hi = np.max([b for _, b in lo_hi], axis=0)
    center = (lo + hi) / 2
    radius = float((hi - lo).max() / 2)
    if radius == 0:
        radius = 1.0
    # keep every particle strictly inside in floating point
    return center, radius * (1 + 1e-12)


def build_tree(sources, targets=None, centers=None, center_radii=None, n_max=512, t_f=0.9,
               norm="l2", level_restrict=False):
    """Build the target-confinement octree.

    Parameters
    ----------
    sources, targets, centers : (N, 3) arrays (``targets``/``centers`` optional)
    center_radii : (Nc,) array or None
        Expansion-ball radii; ``None`` treats centers as points.
    norm : {"l2", "linf"}
        TCR shape: a ball of radius ``sqrt3 |b| (1+t_f)`` or a cube of
        half-width ``|b| (1+t_f)``.
    level_restrict : bool
        Split leaves until adjacent leaves differ by at most one level.
    """
    if norm not in ("l2", "linf"):
        raise ValueError("norm must be 'l2' or 'linf'")
    empty = np.zeros((0, 3))
    src = np.ascontiguousarray(sources if sources is not None else empty, dtype=np.float64).reshape(-1, 3)
    tgt = np.ascontiguousarray(targets if targets is not None else empty, dtype=np.float64).reshape(-1, 3)
    ctr = np.ascontiguousarray(centers if centers is not None else empty, dtype=np.float64).reshape(-1, 3)
    rad = None if center_radii is None else np.ascontiguousarray(center_radii, dtype=np.float64).reshape(-1)
    for a in (src, tgt, ctr):
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite particle coordinates")
    root_c, root_r = _root_cube(src, tgt, ctr, rad)
    lo = root_c - root_r

    level = [0]
    coords = [np.zeros(3, dtype=np.int64)]
    parent = [-1]
    children = [[-1] * 8]
    roles = {"source": src, "target": tgt, "center": ctr}
    owner = {k: np.zeros(v.shape[0], dtype=np.int64) for k, v in roles.items()}
    members = {0: {k: np.arange(v.shape[0]) for k, v in roles.items()}}

    def fits(ids, child_center, child_radius):
        if rad is None:
            return np.ones(ids.size, dtype=bool)
        d = ctr[ids] - child_center
        if norm == "l2":
            return np.sqrt(np.einsum("ij,ij->i", d, d)) + rad[ids] <= SQRT3 * child_radius * (1 + t_f)
        return np.abs(d).max(axis=1) + rad[ids] <= child_radius * (1 + t_f)

    def split(b, force=False):
        mem = members[b]
        total = sum(v.size for v in mem.values())
        if not force and total <= n_max:
            return False
        lb = level[b]
        if lb + 1 > MAX_DEPTH:
            raise TreeDepthError(f"octree exceeded {MAX_DEPTH} levels")
        h = 2 * root_r / 2.0 ** lb
        bc = lo + (coords[b] + 0.5) * h
        crad = root_r / 2.0 ** (lb + 1)
        moves = {}
        for role, ids in mem.items():
            p = roles[role][ids]
            octant = ((p[:, 0] >= bc[0]).astype(np.int64) | ((p[:, 1] >= bc[1]).astype(np.int64) << 1)
                      | ((p[:, 2] >= bc[2]).astype(np.int64) << 2))
            if role == "center":
                bits = np.stack([(octant >> k) & 1 for k in range(3)], 1)
                cc = lo + (2 * coords[b][None, :] + bits + 0.5) * (h / 2)
                ok = fits(ids, cc, crad)
            else:
                ok = np.ones(ids.size, dtype=bool)
            moves[role] = (octant, ok)
        nmove = sum(int(ok.sum()) for _, ok in moves.values())
        if nmove == 0 and not force:
            return False
        for o in range(8):
            sel = {role: mem[role][(oc == o) & ok] for role, (oc, ok) in moves.items()}
            if not force and not any(v.size for v in sel.values()):
                continue
            if children[b][o] >= 0:
                continue
            cid = len(level)
            level.append(lb + 1)
            coords.append(2 * coords[b] + np.array([o & 1, (o >> 1) & 1, (o >> 2) & 1]))
            parent.append(b)
            children.append([-1] * 8)
            children[b][o] = cid
            members[cid] = sel
            for role, ids in sel.items():
                owner[role][ids] = cid
        members[b] = {role: mem[role][~ok] for role, (_, ok) in moves.items()}
        return True

    def refine_from(queue):
        while queue:
            b = queue.pop(0)
            if split(b):
                queue.extend(c for c in children[b] if c >= 0)

    refine_from([0])
    tree = _assemble(root_c, root_r, level, coords, parent, children, src, tgt, ctr, rad, owner, t_f, n_max, norm)
    if level_restrict:
        while True:
            bad = _level_violations(tree)
            if not bad:
                break
            queue = []
            for b in bad:
                split(b, force=True)
                queue.extend(c for c in children[b] if c >= 0)
            refine_from(queue)
            tree = _assemble(root_c, root_r, level, coords, parent, children, src, tgt, ctr, rad,
                             owner, t_f, n_max, norm)
    return tree


def _assemble(root_c, root_r, level, coords, parent, children, src, tgt, ctr, rad, owner, t_f, n_max, norm):
    return TcrOctree(
        root_center=root_c, root_radius=root_r,
        level=np.array(level, dtype=np.int64), coords=np.array(coords, dtype=np.int64).reshape(-1, 3),
        parent=np.array(parent, dtype=np.int64), children=np.array(children, dtype=np.int64).reshape(-1, 8),
        sources=src, targets=tgt, centers=ctr, center_radii=rad,
        source_box=owner["source"].copy(), target_box=owner["target"].copy(), center_box=owner["center"].copy(),
        t_f=t_f, n_max=n_max, norm=norm)


def _level_violations(tree):
    """Leaves adjacent to a leaf more than one level finer."""
    bad = set()
    leaves = tree.leaves
    for b in leaves:
        for c in leaves:
            if tree.level[c] > tree.level[b] + 1 and tree.adjacent(b, c):
                bad.add(int(b))
                break
    return sorted(bad)
