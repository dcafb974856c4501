from .cost import CostLedger, list_entry_cost, modeled_flops
from .driver import (Density, FmmConfig, FmmResult, GeometryBundle, build_geometry_tree,
                     direct_qbx, execute)
from .near import ExpansionDomainError, qbx_direct

__all__ = [
    "CostLedger", "list_entry_cost", "modeled_flops", "Density", "FmmConfig", "FmmResult",
    "GeometryBundle", "build_geometry_tree", "direct_qbx", "execute", "ExpansionDomainError",
    "qbx_direct",
]
