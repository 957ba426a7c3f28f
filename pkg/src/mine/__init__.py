"""Per-sample mutual information estimation."""
from src.mine.estimator import (
    MineEstimator,
    PairBatch,
    create_estimator,
    dv_bound,
    dv_objective,
    mi_gradient_wrt_delta,
    mi_value,
    mine_update,
)
from src.mine.sampling import ProjectionBank, compress, conv_features, make_projection_bank

__all__ = [
    "MineEstimator",
    "PairBatch",
    "ProjectionBank",
    "compress",
    "conv_features",
    "create_estimator",
    "dv_bound",
    "dv_objective",
    "make_projection_bank",
    "mi_gradient_wrt_delta",
    "mi_value",
    "mine_update",
]
