"""
Per-sample Donsker-Varadhan MI estimation.

A `MineEstimator` is bound to one reference sample for the lifetime of an
attack. Its statistics network is warm-started across `mine_update` calls;
each ascent step draws a fresh shuffle permutation for the marginal pairs,
and the last permutation is kept so the MI gradient w.r.t. the perturbation
is taken at a fixed (theta, shuffle).
"""
import logging
from dataclasses import dataclass, field
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np

from src.core.config import MineConfig
from src.mine.sampling import ProjectionBank, compress, conv_feature_width, conv_features, make_projection_bank
from src.models.network import ModelState, forward, init_model
from src.models.zoo import create_statistics_net_spec
from src.tensor import OptimizerState, Tensor, as_tensor, backward, optimizer_step, parameter
from src.tensor import functional as F
from src.utils.errors import ShapeMismatchError

logger = logging.getLogger(__name__)

Scheme = Literal["random", "conv"]


@dataclass
class PairBatch:
    """K joint pairs (u_k, v_k); marginal pairs are (u_k, v_perm[k])."""

    u: Tensor
    v: Tensor
    perm: np.ndarray

    def __post_init__(self):
        if self.u.shape != self.v.shape:
            raise ShapeMismatchError("PairBatch", self.u.shape, self.v.shape)
        if sorted(self.perm.tolist()) != list(range(self.u.shape[0])):
            raise ValueError("perm must be a permutation of 0..K-1")

    @property
    def k(self) -> int:
        return self.u.shape[0]


def statistics_scores(net: ModelState, params: Sequence[Tensor], u, v) -> Tensor:
    """T(u_k, v_k) for every row; returns a (K,) tensor."""
    pairs = F.concat([as_tensor(u), as_tensor(v)], axis=1)
    out, _ = forward(net.spec, params, pairs)
    return F.reshape(out, (out.shape[0],))


def dv_bound(joint_scores, marginal_scores) -> Tensor:
    """mean(T_joint) - log(mean(exp(T_marginal))), max-shifted."""
    return F.sub(F.mean(as_tensor(joint_scores)), F.log_mean_exp(as_tensor(marginal_scores)))


def dv_objective(net: ModelState, batch: PairBatch, params: Optional[Sequence[Tensor]] = None) -> Tensor:
    """
    Donsker-Varadhan estimate I(theta) on one pair batch.

    Differentiable w.r.t. the statistics parameters (when `params` require
    gradients) and w.r.t. the v inputs.
    """
    params = params if params is not None else net.tensors()
    joint = statistics_scores(net, params, batch.u, batch.v)
    marginal = statistics_scores(net, params, batch.u, F.take(batch.v, batch.perm, axis=0))
    return dv_bound(joint, marginal)


@dataclass
class MineEstimator:
    """
    Statistics network plus sampling scheme for one reference sample.

    Attributes:
        net: Statistics network T_theta (a mine-statistics ModelState)
        scheme: "random" (projection bank) or "conv" (first conv layer maps)
        bank: Projection bank for the random scheme
        feature_model: Model providing conv features for the conv scheme
        optimizer: Adam state carried across updates
        inner_steps: Default ascent steps per update (T_I)
        rng: Source of shuffle permutations
        perm: Permutation used by the most recent evaluation
        estimate: Most recent MI estimate
        history: Every estimate returned by `mine_update`
    """

    net: ModelState
    scheme: Scheme
    optimizer: OptimizerState
    inner_steps: int
    rng: np.random.Generator
    perm: np.ndarray
    bank: Optional[ProjectionBank] = None
    feature_model: Optional[ModelState] = None
    estimate: Optional[float] = None
    history: List[float] = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.perm)

    def views(self, x) -> Tensor:
        """The K compressed views of a sample, differentiable in x."""
        if self.scheme == "conv":
            return conv_features(self.feature_model, x)
        return compress(self.bank, x)

    def batch(self, x, xpd, perm: Optional[np.ndarray] = None) -> PairBatch:
        return PairBatch(self.views(x), self.views(xpd), self.perm if perm is None else perm)


def create_estimator(
    sample_shape: Sequence[int],
    cfg: MineConfig,
    seed: int,
    feature_model: Optional[ModelState] = None,
    shuffle_seed: Optional[int] = None,
) -> MineEstimator:
    """
    Build a fresh estimator for one sample.

    The conv scheme is used when requested (or with scheme "auto") and the
    feature model starts with a conv layer; otherwise random sampling.

    Args:
        sample_shape: Shape of the reference sample
        cfg: MINE settings
        seed: Seeds the projection bank and the statistics network
        feature_model: Target model, source of conv features
        shuffle_seed: Seeds the shuffle permutations (default: drawn from `seed`)
    """
    rng = np.random.default_rng(seed)
    has_conv = feature_model is not None and feature_model.spec.first_conv_index() is not None
    scheme: Scheme = "random"
    if cfg.scheme in ("auto", "conv") and has_conv:
        scheme = "conv"
    elif cfg.scheme == "conv":
        logger.warning("Conv-feature MINE requested but the target model has no leading conv layer; using random sampling")

    bank = None
    if scheme == "conv":
        k = feature_model.spec.layers[0].filters
        half_width = conv_feature_width(feature_model)
    else:
        d = int(np.prod(sample_shape))
        bank = make_projection_bank(int(rng.integers(0, 2**31 - 1)), d, cfg.d_prime, cfg.k)
        k, half_width = cfg.k, cfg.d_prime

    net = init_model(create_statistics_net_spec(half_width, cfg.hidden), int(rng.integers(0, 2**31 - 1)))
    if shuffle_seed is not None:
        rng = np.random.default_rng(shuffle_seed)
    return MineEstimator(
        net=net,
        scheme=scheme,
        optimizer=OptimizerState(kind="adam", lr=cfg.lr),
        inner_steps=cfg.inner_steps,
        rng=rng,
        perm=rng.permutation(k),
        bank=bank,
        feature_model=feature_model if scheme == "conv" else None,
    )


def mine_update(est: MineEstimator, x, xpd, steps: Optional[int] = None) -> Tuple[MineEstimator, float]:
    """
    Run `steps` gradient-ascent steps on the DV bound, warm-starting from the current theta.

    Args:
        est: Estimator (updated in place and returned)
        x: Reference sample
        xpd: Perturbed sample x + delta, same shape as x
        steps: Ascent steps; defaults to `est.inner_steps`

    Returns:
        (estimator, I(theta) after the last step at the last permutation)
    """
    steps = est.inner_steps if steps is None else steps
    if steps < 0:
        raise ValueError(f"steps must be >= 0, got {steps}")
    x, xpd = as_tensor(x).detach(), as_tensor(xpd).detach()
    if x.shape != xpd.shape:
        raise ShapeMismatchError("mine_update", x.shape, xpd.shape)

    u, v = est.views(x), est.views(xpd)
    for _ in range(steps):
        est.perm = est.rng.permutation(est.k)
        params = est.net.tensors(requires_grad=True)
        objective = dv_objective(est.net, PairBatch(u, v, est.perm), params)
        grads = backward(objective, params)
        # ascent on I(theta) is descent on -I(theta)
        optimizer_step(est.optimizer, est.net.params, [-g for g in grads])

    value = dv_objective(est.net, PairBatch(u, v, est.perm)).item()
    est.estimate = value
    est.history.append(value)
    return est, value


def mi_value(est: MineEstimator, x, xpd) -> float:
    """I(theta) at the current theta and permutation, without updating."""
    return dv_objective(est.net, est.batch(as_tensor(x).detach(), as_tensor(xpd).detach())).item()


def mi_gradient_wrt_delta(est: MineEstimator, x, delta) -> Tuple[float, np.ndarray]:
    """
    Exact gradient of the DV estimate w.r.t. delta, holding theta and the shuffle fixed.

    Returns:
        (I(theta) at x + delta, gradient shaped like delta)
    """
    x = as_tensor(x).detach()
    d = parameter(as_tensor(delta).values)
    if x.shape != d.shape:
        raise ShapeMismatchError("mi_gradient_wrt_delta", x.shape, d.shape)
    objective = dv_objective(est.net, PairBatch(est.views(x), est.views(F.add(x, d)), est.perm))
    (grad,) = backward(objective, [d])
    return objective.item(), grad
