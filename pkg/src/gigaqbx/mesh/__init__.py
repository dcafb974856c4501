from .discretization import (DegenerateElementError, QuadratureDiscretization,
                             SurfaceDiscretization, bisect, make_quadrature,
                             principal_curvatures, stretch_factor, upsample)
from .generators import RefinementDidNotConverge, gen_sphere, gen_urchin
from .io import load_mesh, save_mesh, write_element_diagnostics

__all__ = [
    "DegenerateElementError", "QuadratureDiscretization", "SurfaceDiscretization",
    "bisect", "make_quadrature", "principal_curvatures", "stretch_factor", "upsample",
    "RefinementDidNotConverge", "gen_sphere", "gen_urchin",
    "load_mesh", "save_mesh", "write_element_diagnostics",
]
