"""Modeled operation counts per interaction-list entry.

=========================  =====================
list                       cost per entry
=========================  =====================
U, W_close, X_close        ``q^2 * n_s * n_t``
V                          ``p^3``
W_far                      ``p^3 * n_t``
X_far                      ``p^2 * n_s``
=========================  =====================

``n_s`` counts sources owned by the list box; ``n_t`` counts centers and
conventional targets owned by the target box; ``p = p_fmm``, ``q = p_qbx``.
"""
import json
from dataclasses import dataclass, field

import numpy as np

LIST_COST_NAMES = ("U", "V", "W_close", "W_far", "X_close", "X_far")
STAGES = ("form_multipoles", "propagate_multipoles", "direct_near", "m2l",
          "list3_far", "list4_far", "propagate_locals", "form_qbx_locals", "eval")


def list_entry_cost(name, p, q, n_s, n_t):
    if name in ("U", "W_close", "X_close"):
        return q * q * n_s * n_t
    if name == "V":
        return p ** 3
    if name == "W_far":
        return p ** 3 * n_t
    if name == "X_far":
        return p * p * n_s
    raise ValueError(f"unknown list {name!r}")


@dataclass
class CostLedger:
    lists: dict = field(default_factory=lambda: {
        n: {"entries": 0, "n_s": 0, "n_t": 0, "flops": 0} for n in LIST_COST_NAMES})
    stages: dict = field(default_factory=lambda: {s: 0 for s in STAGES})

    def add(self, name, p, q, n_s, n_t):
        c = int(list_entry_cost(name, p, q, int(n_s), int(n_t)))
        rec = self.lists[name]
        rec["entries"] += 1
        rec["n_s"] += int(n_s)
        rec["n_t"] += int(n_t)
        rec["flops"] += int(c)
        return c

    @property
    def list_total(self):
        return sum(r["flops"] for r in self.lists.values())

    @property
    def total(self):
        return sum(self.stages.values())

    def to_dict(self):
        lists = {n: {k: int(v) for k, v in r.items()} for n, r in self.lists.items()}
        stages = {s: int(v) for s, v in self.stages.items()}
        return {"lists": lists, "stages": stages,
                "list_total": int(self.list_total), "total": int(self.total)}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def modeled_flops(lists, tree, p_fmm, p_qbx):
    """Ledger for the given tree and lists.

    Stage aggregates: multipole formation ``p^2`` per source; M2M and L2L
    ``p^3`` per edge; list stages as in the table; QBX local formation from
    box locals ``p^3`` per center; evaluation ``q^2`` per center target and
    ``p^2`` per conventional target.
    """
    led = CostLedger()
    p, q = p_fmm, p_qbx
    ns = tree.owned_counts("source")
    nt = tree.owned_counts("center") + tree.owned_counts("target")
    has_src = tree.subtree_counts("source") > 0
    led.stages["form_multipoles"] = int(p * p * ns.sum())
    led.stages["propagate_multipoles"] = int(p ** 3 * np.count_nonzero(has_src[1:]))
    target_set = set(int(b) for b in lists.boxes)
    for b in lists.boxes:
        b = int(b)
        for name, stage in (("U", "direct_near"), ("W_close", "direct_near"), ("X_close", "direct_near"),
                            ("V", "m2l"), ("W_far", "list3_far"), ("X_far", "list4_far")):
            for x in lists.get(name, b):
                led.stages[stage] += led.add(name, p, q, ns[x], nt[b])
        if tree.parent[b] >= 0 and int(tree.parent[b]) in target_set:
            led.stages["propagate_locals"] += p ** 3
    nc = int(tree.owned_counts("center").sum())
    led.stages["form_qbx_locals"] = int(p ** 3 * nc)
    led.stages["eval"] = int(q * q * nc + p * p * tree.owned_counts("target").sum())
    return led
