"""Green's identity residual on a closed surface.

For ``u`` the potential of a point charge outside the surface,
``S(du/dn) - D(u) = u / 2`` on the surface. Both layer potentials are
evaluated by QBX from each side; the average of the two one-sided limits is
the on-surface value.
"""
from dataclasses import dataclass

import numpy as np

from ..fmm.driver import Density, FmmConfig, GeometryBundle, direct_qbx, execute
from ..kernels import INV_4PI
from ..refinement import (PipelineResult, RefinementConfig, associate_surface, run_pipeline,
                          surface_targets)

DEFAULT_CHARGE = (3.0, 1.0, 2.0)


@dataclass(frozen=True)
class GreenSetup:
    pipeline: PipelineResult
    targets: np.ndarray      # (2N, 3): each stage-1 node twice
    side_pref: np.ndarray    # (2N,): -1, +1 alternating
    bundle: GeometryBundle


def green_setup(disc, quad_order, cfg: RefinementConfig = RefinementConfig()):
    res = run_pipeline(disc, quad_order, cfg)
    targets, side = surface_targets(res, two_sided=True)
    assoc = associate_surface(res, targets, side, cfg.eps_ta)
    bundle = GeometryBundle.from_pipeline(res, targets, assoc)
    if bundle.flagged.size:
        raise ValueError(f"{bundle.flagged.size} flagged targets: geometry under-refined")
    return GreenSetup(res, targets, side, bundle)


def point_charge(points, charge):
    return INV_4PI / np.linalg.norm(points - np.asarray(charge), axis=-1)


def green_density(bundle: GeometryBundle, charge=DEFAULT_CHARGE):
    """Densities ``(du/dn, -u)`` sampled analytically at the quadrature nodes."""
    d = bundle.source_positions - np.asarray(charge)
    r = np.linalg.norm(d, axis=1)
    u = INV_4PI / r
    dudn = -INV_4PI * np.einsum("ij,ij->i", d, bundle.source_normals) / r ** 3
    return Density(single=dudn, double=-u)


def layer_values(setup: GreenSetup, p_qbx, p_fmm=None, charge=DEFAULT_CHARGE, engine="direct",
                 fmm_cfg: FmmConfig = None):
    """One-sided values of ``S(du/dn) - D(u)`` at every target."""
    den = green_density(setup.bundle, charge)
    if engine == "direct":
        return direct_qbx(setup.bundle, den, p_qbx)
    if engine == "fmm":
        if fmm_cfg is None:
            fmm_cfg = FmmConfig(p_fmm=p_fmm, p_qbx=p_qbx, allow_low_fmm_order=True)
        return execute(setup.bundle, den, fmm_cfg).potential
    raise ValueError("engine must be 'direct' or 'fmm'")


def green_error(setup: GreenSetup, p_qbx, p_fmm=None, charge=DEFAULT_CHARGE, engine="direct",
                fmm_cfg: FmmConfig = None):
    """``max |avg - u/2| / max |u|`` over the surface nodes."""
    vals = layer_values(setup, p_qbx, p_fmm, charge, engine, fmm_cfg)
    return residual_from_values(setup, vals, charge)


def residual_from_values(setup: GreenSetup, vals, charge=DEFAULT_CHARGE):
    u = point_charge(setup.targets[0::2], charge)
    avg = 0.5 * (vals[0::2] + vals[1::2])
    return float(np.abs(avg - u / 2).max() / np.abs(u).max())
