from .expansion import (Expansion, SingularExpansionError, eval_expansion,
                        eval_expansion_complex, form_expansion, translate,
                        truncation_bound)
from .harmonics import idx, ncoeffs, sph_harm

__all__ = [
    "Expansion", "SingularExpansionError", "eval_expansion", "eval_expansion_complex",
    "form_expansion", "translate", "truncation_bound", "idx", "ncoeffs", "sph_harm",
]
