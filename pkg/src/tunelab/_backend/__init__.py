"""Sweep-kernel backend selection.

The hot path of this package is solving one small dense linear system per
hyperparameter value, thousands to millions of times per run.  A Cython
extension (``_core``) implements that loop in C; ``pure`` is a NumPy
implementation with the same signatures.  The compiled backend is used when
importable, unless ``TUNELAB_BACKEND`` forces a choice:

* ``TUNELAB_BACKEND=pure``      always use the NumPy kernels
* ``TUNELAB_BACKEND=compiled``  require the extension (ImportError if absent)
* unset / ``auto``              prefer compiled, fall back to pure
"""

from __future__ import annotations

import os

from . import pure
from .pure import RESIDUAL_LIMIT, SingularSystemError

_requested = os.environ.get("TUNELAB_BACKEND", "auto").lower()
if _requested not in ("auto", "pure", "compiled"):
    raise ValueError(f"TUNELAB_BACKEND must be auto|pure|compiled, got {_requested!r}")

compiled = None
if _requested in ("auto", "compiled"):
    try:
        from . import _core as compiled  # type: ignore[attr-defined]
    except ImportError:
        compiled = None
    if _requested == "compiled" and compiled is None:
        raise ImportError("TUNELAB_BACKEND=compiled but the tunelab._backend._core "
                          "extension is not built")

active = compiled if compiled is not None else pure
BACKEND = active.NAME

alpha_scores = active.alpha_scores
alpha_predictions = active.alpha_predictions
lambda_scores = active.lambda_scores
lambda_predictions = active.lambda_predictions
delta_scores = active.delta_scores
delta_predictions = active.delta_predictions

__all__ = [
    "BACKEND",
    "RESIDUAL_LIMIT",
    "SingularSystemError",
    "active",
    "compiled",
    "pure",
    "alpha_scores",
    "alpha_predictions",
    "lambda_scores",
    "lambda_predictions",
    "delta_scores",
    "delta_predictions",
]
