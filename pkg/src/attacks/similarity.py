"""
Similarity objectives steered by the attacks.

An objective reports a similarity S between x and x + delta together with
its gradient w.r.t. delta. The attack maximizes S (supervised, keep the
example close to x) or -S (unsupervised, push it away). MINE is the
default; feature distances and the reconstruction norm are ablations.
"""
import logging
from typing import Optional, Protocol, Sequence, Tuple, runtime_checkable

import numpy as np

from src.core.config import AttackConfig
from src.mine.estimator import MineEstimator, create_estimator, mi_gradient_wrt_delta, mi_value, mine_update
from src.mine.sampling import conv_features
from src.models.network import ModelState, ae_forward, recon_loss
from src.tensor import Tensor, as_tensor, backward, parameter
from src.tensor import functional as F
from src.utils.errors import ShapeMismatchError

logger = logging.getLogger(__name__)


@runtime_checkable
class SimilarityObjective(Protocol):
    name: str

    def warmup(self, x: np.ndarray, delta: np.ndarray) -> float:
        """Prepare the objective at the starting point; returns S there."""

    def refresh(self, x: np.ndarray, delta: np.ndarray) -> float:
        """Re-fit any learned state at a new iterate; returns S there."""

    def value_and_grad(self, x: np.ndarray, delta: np.ndarray) -> Tuple[float, np.ndarray]:
        """S at x + delta and dS/d delta."""


def alt_similarity(features_x, features_xpd, kind: str) -> Tensor:
    """
    Feature dissimilarity: Euclidean distance ("l2") or 1 - cosine ("cosine").

    A zero feature vector has cosine distance 1.
    """
    fx, fy = F.reshape(as_tensor(features_x), (-1,)), F.reshape(as_tensor(features_xpd), (-1,))
    if fx.shape != fy.shape:
        raise ShapeMismatchError("alt_similarity", fx.shape, fy.shape)
    if kind == "l2":
        return F.l2_norm(F.sub(fx, fy))
    if kind != "cosine":
        raise ValueError(f"Unknown similarity kind '{kind}'")
    norm_x, norm_y = F.l2_norm(fx), F.l2_norm(fy)
    if norm_x.item() == 0.0 or norm_y.item() == 0.0:
        return Tensor(1.0)
    cos = F.div(F.sum(F.mul(fx, fy)), F.mul(norm_x, norm_y))
    return F.sub(1.0, cos)


class MineSimilarity:
    """S = I_theta(x, x + delta) from a per-sample MINE estimator."""

    name = "mine"

    def __init__(self, estimator: MineEstimator, warmup_steps: Optional[int] = None):
        self.estimator = estimator
        self.warmup_steps = estimator.inner_steps if warmup_steps is None else warmup_steps

    def warmup(self, x, delta):
        _, value = mine_update(self.estimator, x, np.asarray(x) + delta, self.warmup_steps)
        return value

    def refresh(self, x, delta):
        _, value = mine_update(self.estimator, x, np.asarray(x) + delta)
        return value

    def value_and_grad(self, x, delta):
        return mi_gradient_wrt_delta(self.estimator, x, delta)

    def value(self, x, delta) -> float:
        return mi_value(self.estimator, x, np.asarray(x) + delta)


class _DeltaObjective:
    """Shared plumbing for objectives that are plain functions of delta."""

    name = "delta"

    def _similarity(self, x: Tensor, delta: Tensor) -> Tensor:
        raise NotImplementedError

    def value_and_grad(self, x, delta):
        x = as_tensor(x).detach()
        d = parameter(as_tensor(delta).values)
        s = self._similarity(x, d)
        if not s.requires_grad:
            return s.item(), np.zeros(d.shape)
        (grad,) = backward(s, [d])
        return s.item(), grad

    def warmup(self, x, delta):
        return self._similarity(as_tensor(x), as_tensor(delta)).item()

    refresh = warmup


class FeatureDistanceSimilarity(_DeltaObjective):
    """
    S = -distance(features(x), features(x + delta)).

    Features are the first conv layer's maps when the model has one, the raw
    sample otherwise.
    """

    def __init__(self, kind: str, feature_model: Optional[ModelState] = None):
        if kind not in ("l2", "cosine"):
            raise ValueError(f"Unknown feature distance '{kind}'")
        self.kind = kind
        self.name = f"{kind}-feature"
        has_conv = feature_model is not None and feature_model.spec.first_conv_index() is not None
        self.feature_model = feature_model if has_conv else None

    def _features(self, x: Tensor) -> Tensor:
        return conv_features(self.feature_model, x) if self.feature_model is not None else x

    def _similarity(self, x, delta):
        return F.mul(alt_similarity(self._features(x), self._features(F.add(x, delta)), self.kind), -1.0)


class ReconstructionSimilarity(_DeltaObjective):
    """S = -||x - Phi(x + delta)||_2 (the L2-UAE objective)."""

    name = "recon-l2"

    def __init__(self, model: ModelState):
        self.model = model

    def _similarity(self, x, delta):
        return F.mul(recon_loss(x, ae_forward(self.model, F.add(x, delta))), -1.0)


def make_similarity(
    cfg: AttackConfig,
    sample_shape: Sequence[int],
    seed: int,
    model: Optional[ModelState] = None,
    shuffle_seed: Optional[int] = None,
) -> SimilarityObjective:
    """Build the similarity objective an attack config names."""
    if cfg.similarity == "mine":
        estimator = create_estimator(sample_shape, cfg.mine, seed, feature_model=model, shuffle_seed=shuffle_seed)
        return MineSimilarity(estimator, cfg.mine.warmup_steps)
    if cfg.similarity == "l2-feature":
        return FeatureDistanceSimilarity("l2", model)
    if cfg.similarity == "cosine-feature":
        return FeatureDistanceSimilarity("cosine", model)
    if model is None:
        raise ValueError("recon-l2 similarity needs the target autoencoder")
    return ReconstructionSimilarity(model)
