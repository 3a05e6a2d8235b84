"""tunelab: hyperparameter tuning for graph-based semi-supervised learners.

Subpackages cover exact label-propagation solvers for three one-parameter
families, piecewise-constant loss profiling with breakpoint localization,
multi-instance ERM tuning with sample-size accounting, constructive
shattering gadgets, and desk-scale SGC/GCAN modules with generalization
bound calculators.
"""

from ._backend import BACKEND
from . import gadgets, gnn, profiler, tuner  # noqa: F401  (public submodules)
from .instances import (
    InvalidInstanceError,
    ProblemInstance,
    SchemaError,
    TunelabError,
    generate_random,
    label_matrix,
    load,
    save,
    validate,
)
from .solvers import (
    ALPHA,
    DELTA,
    LAMBDA,
    Family,
    ScoreMatrix,
    SolverError,
    clamped_predictions,
    get_family,
    margin_loss,
    predict,
    solve_local_global,
    solve_normalized_adj,
    solve_smoothing,
    zero_one_loss,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "__version__",
    "ProblemInstance",
    "TunelabError",
    "SchemaError",
    "InvalidInstanceError",
    "SolverError",
    "generate_random",
    "label_matrix",
    "load",
    "save",
    "validate",
    "Family",
    "ScoreMatrix",
    "get_family",
    "ALPHA",
    "LAMBDA",
    "DELTA",
    "solve_local_global",
    "solve_smoothing",
    "solve_normalized_adj",
    "predict",
    "clamped_predictions",
    "zero_one_loss",
    "margin_loss",
]
