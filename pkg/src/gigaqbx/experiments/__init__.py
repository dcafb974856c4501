from .green import (DEFAULT_CHARGE, GreenSetup, green_density, green_error, green_setup,
                    layer_values, residual_from_values)
from .scaling import ScalingConfig, parse_geometry, scaling_study, write_csv
from .translation import (KINDS, TranslationExperimentGrid, TranslationExperimentResult,
                          run_translation_experiment, sphere_points)

__all__ = [
    "DEFAULT_CHARGE", "GreenSetup", "green_density", "green_error", "green_setup", "layer_values",
    "residual_from_values", "ScalingConfig", "parse_geometry", "scaling_study", "write_csv",
    "KINDS", "TranslationExperimentGrid", "TranslationExperimentResult",
    "run_translation_experiment", "sphere_points",
]
