"""
First-order optimizers (SGD and Adam) over lists of parameter arrays.

Optimizer state lives in an explicit `OptimizerState` so a training loop or a
MINE estimator can carry it across calls (warm starts) and so the update is
a pure function of (state, params, grads).
"""
import logging
from dataclasses import dataclass, field
from typing import List, Literal, Sequence, Tuple

import numpy as np

from src.utils.errors import ShapeMismatchError

logger = logging.getLogger(__name__)

OptimizerKind = Literal["sgd", "adam"]


@dataclass
class OptimizerState:
    """
    State of an SGD or Adam optimizer.

    Attributes:
        kind: "sgd" or "adam"
        lr: Learning rate (> 0)
        beta1, beta2, eps: Adam hyperparameters
        step: Number of updates applied so far
        m, v: Adam first/second moments, one array per parameter
    """

    kind: OptimizerKind = "adam"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError(f"Learning rate must be positive, got {self.lr}")
        if self.kind not in ("sgd", "adam"):
            raise ValueError(f"Unknown optimizer kind '{self.kind}'")


def optimizer_step(
    state: OptimizerState, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]
) -> Tuple[List[np.ndarray], OptimizerState]:
    """
    Apply one descent step to `params` in place.

    sgd: p <- p - lr * g. adam: bias-corrected moment update.

    Args:
        state: Optimizer state (updated in place and returned)
        params: Parameter arrays (float64, updated in place)
        grads: Gradients, one per parameter

    Returns:
        The updated parameters and state

    Raises:
        ShapeMismatchError: If the number or shapes of grads do not match params
    """
    if len(params) != len(grads):
        raise ShapeMismatchError("optimizer_step", f"{len(params)} gradients", len(grads))
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise ShapeMismatchError("optimizer_step", p.shape, g.shape, {"param_index": i})

    state.step += 1
    if state.kind == "sgd":
        for p, g in zip(params, grads):
            p -= state.lr * g
        return list(params), state

    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    elif any(m.shape != p.shape for m, p in zip(state.m, params)):
        raise ShapeMismatchError("optimizer_step", [m.shape for m in state.m], [p.shape for p in params])

    bias1 = 1.0 - state.beta1**state.step
    bias2 = 1.0 - state.beta2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / bias1
        v_hat = v / bias2
        p -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return list(params), state
