"""Desk-scale graph neural modules and generalization-bound calculators."""

from .bounds import (
    BoundInputs,
    gcan_constants,
    gcan_embedding_norm_bound,
    rademacher_bound_gcan,
    rademacher_bound_sgc,
    sgc_constants,
)
from .gcan import (
    GcanModel,
    gcan_forward,
    gcan_margin_loss,
    gcan_train,
    init_gcan,
    tune_eta,
)
from .sgc import (
    GdConfig,
    SgcModel,
    export_sweep_csv,
    sgc_features,
    sgc_forward,
    sgc_propagation,
    sgc_train,
    sgc_train_loss_and_grad,
    tune_beta,
)

__all__ = [
    "BoundInputs",
    "GcanModel",
    "GdConfig",
    "SgcModel",
    "gcan_constants",
    "gcan_embedding_norm_bound",
    "gcan_forward",
    "gcan_margin_loss",
    "gcan_train",
    "init_gcan",
    "rademacher_bound_gcan",
    "rademacher_bound_sgc",
    "sgc_constants",
    "sgc_features",
    "sgc_forward",
    "sgc_propagation",
    "sgc_train",
    "sgc_train_loss_and_grad",
    "export_sweep_csv",
    "tune_beta",
    "tune_eta",
]
