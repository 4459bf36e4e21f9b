"""Group-invariant focusing NLS: thresholds, classification and spectral evolution."""

__version__ = "0.1.0"

from .fields import ComplexField, Grid, NlsParameters  # noqa: E402
from .functionals import evaluate, rescale_to_nehari, scale  # noqa: E402
from .symmetry import GroupElement, SymmetryGroup, builtin_group, load_group, satisfies_star  # noqa: E402
from .ground_state import ground_state, minimize_action, shoot_radial  # noqa: E402
from .thresholds import ThresholdTable, predict, scattering_threshold  # noqa: E402
from .evolution import EvolveConfig, evolve  # noqa: E402
from .experiments import ExperimentSpec, Recipe, run_experiment, sweep  # noqa: E402

__all__ = [
    "__version__",
    "ComplexField",
    "Grid",
    "NlsParameters",
    "GroupElement",
    "SymmetryGroup",
    "builtin_group",
    "load_group",
    "satisfies_star",
    "evaluate",
    "scale",
    "rescale_to_nehari",
    "ground_state",
    "minimize_action",
    "shoot_radial",
    "ThresholdTable",
    "predict",
    "scattering_threshold",
    "EvolveConfig",
    "evolve",
    "ExperimentSpec",
    "Recipe",
    "run_experiment",
    "sweep",
]
