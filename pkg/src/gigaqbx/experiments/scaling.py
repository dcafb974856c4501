"""Modeled-cost scaling over geometry size, TCR norm and ``n_max``."""
import csv
from dataclasses import dataclass

import numpy as np

from ..fmm.cost import LIST_COST_NAMES, modeled_flops
from ..mesh.generators import gen_sphere, gen_urchin
from ..refinement import RefinementConfig, run_pipeline
from ..tree.lists import build_lists
from ..tree.octree import build_tree


@dataclass(frozen=True)
class ScalingConfig:
    p_fmm: int = 15
    p_qbx: int = 5
    t_f: float = 0.9
    quad_order: int = 21
    mesh_order: int = 4
    urchin_tol: float = 1e-4


def parse_geometry(spec, mesh_order=4, urchin_tol=1e-4):
    """``"sphere:L"`` (refinement level) or ``"urchin:k"``."""
    try:
        name, arg = spec.split(":")
        arg = int(arg)
    except ValueError:
        raise ValueError(f"bad geometry spec {spec!r}; expected sphere:L or urchin:k") from None
    if name == "sphere":
        return gen_sphere(1.0, arg, mesh_order)
    if name == "urchin":
        return gen_urchin(arg, urchin_tol, mesh_order)
    raise ValueError(f"unknown geometry {name!r}")


def cost_row(pipeline, norm, n_max, cfg: ScalingConfig):
    src = pipeline.quad.flat()[0]
    c = pipeline.centers
    tree = build_tree(src, centers=c.positions, center_radii=c.radii, n_max=n_max, t_f=cfg.t_f,
                      norm=norm)
    lists = build_lists(tree, cfg.p_fmm ** 3 / cfg.p_qbx ** 2)
    led = modeled_flops(lists, tree, cfg.p_fmm, cfg.p_qbx)
    row = {"norm": norm, "n_max": n_max, "n_sources": src.shape[0], "n_centers": len(c),
           "n_particles": src.shape[0] + len(c), "n_boxes": tree.nboxes,
           "suspended_centers": int(tree.suspended_centers().size)}
    row.update({f"flops_{k}": led.lists[k]["flops"] for k in LIST_COST_NAMES})
    row.update({f"stage_{k}": v for k, v in led.stages.items()})
    row["flops_total"] = led.total
    return row


def scaling_study(geometries=("urchin:2", "urchin:3"), cfg: ScalingConfig = ScalingConfig(),
                  norms=("l2", "linf"), n_max_values=(512,), refine_cfg=RefinementConfig()):
    """One row per (geometry, norm, n_max) with modeled flops per list and stage.

    Sources are the stage-2 quadrature nodes and every stage-1 center is an
    active QBX center, as for on-surface evaluation.
    """
    rows = []
    for spec in geometries:
        disc = parse_geometry(spec, cfg.mesh_order, cfg.urchin_tol)
        pipe = run_pipeline(disc, cfg.quad_order, refine_cfg)
        for norm in norms:
            for n_max in n_max_values:
                row = {"geometry": spec}
                row.update(cost_row(pipe, norm, n_max, cfg))
                rows.append(row)
    return rows


def write_csv(rows, path):
    if not rows:
        return
    keys = list(rows[0])
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=keys)
        w.writeheader()
        w.writerows(rows)


def growth_ratio(rows, small, large, norm="l2", n_max=512):
    """``(flop ratio, particle ratio)`` between two geometries."""
    pick = {r["geometry"]: r for r in rows if r["norm"] == norm and r["n_max"] == n_max}
    a, b = pick[small], pick[large]
    return b["flops_total"] / a["flops_total"], b["n_particles"] / a["n_particles"]


def best_n_max(rows, geometry, norm="l2"):
    sel = [r for r in rows if r["geometry"] == geometry and r["norm"] == norm]
    totals = np.array([r["flops_total"] for r in sel])
    return sel[int(np.argmin(totals))]["n_max"], {r["n_max"]: r["flops_total"] for r in sel}
