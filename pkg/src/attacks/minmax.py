"""
MinMax attack: alternating projected gradient descent on delta and ascent on c.

Objective F(delta, c) = c * f^+(x + delta) - I~(x, x + delta), where
I~ = S for direction "maximize" and I~ = -S for "minimize". Each iteration:

  1. delta <- delta - alpha * (c * grad f^+ - grad I~)
  2. clip delta to [-eps, eps], then x + delta to [0, 1]
  3. refresh the similarity objective (T_I MINE ascent steps) at the new delta
  4. c <- (1 - beta / t^(1/4)) * c + beta * f^+, clamped to [0, c_max]
  5. keep delta as delta* when f <= 0 and I~ improves on the best so far
"""
import logging
import math
import time
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from src.attacks.criteria import AttackCriterion, hinge
from src.attacks.projections import c_update, project_box, stationarity
from src.attacks.similarity import SimilarityObjective, make_similarity
from src.attacks.types import AttackResult, TraceRow
from src.core.config import AttackConfig
from src.validation.validators import ensure_feasible

logger = logging.getLogger(__name__)


@dataclass
class IterateState:
    """Quantities evaluated at one iterate delta, reused by the next gradient step."""

    f: float
    grad_f: np.ndarray
    s: float
    grad_s: np.ndarray


def direction_sign(cfg: AttackConfig, criterion: AttackCriterion) -> float:
    """+1 when the attack maximizes similarity, -1 when it minimizes it."""
    direction = cfg.direction or ("maximize" if criterion.supervised else "minimize")
    return 1.0 if direction == "maximize" else -1.0


def evaluate_iterate(x: np.ndarray, delta: np.ndarray, criterion: AttackCriterion, similarity: SimilarityObjective) -> IterateState:
    f, grad_f = criterion.value_and_grad(x, delta)
    s, grad_s = similarity.value_and_grad(x, delta)
    return IterateState(f, grad_f, s, grad_s)


def objective_gradients(state: IterateState, c: float, sign: float) -> Tuple[np.ndarray, float]:
    """(dF/d delta, dF/dc) at an iterate; the f^+ gradient is gated off when f <= 0."""
    fplus, gate = hinge(state.f)
    grad_delta = -sign * state.grad_s
    if gate:
        grad_delta = grad_delta + c * state.grad_f
    return grad_delta, fplus


def resolve_similarity(
    x: np.ndarray, criterion: AttackCriterion, cfg: AttackConfig, similarity: Optional[SimilarityObjective], seed: Optional[int]
) -> SimilarityObjective:
    if similarity is not None:
        return similarity
    return make_similarity(cfg, x.shape, cfg.seed if seed is None else seed, criterion.model)


def minmax_attack(
    x: np.ndarray,
    criterion: AttackCriterion,
    cfg: AttackConfig,
    similarity: Optional[SimilarityObjective] = None,
    seed: Optional[int] = None,
) -> AttackResult:
    """
    Run the MinMax attack on one sample.

    Args:
        x: Sample with values in [0, 1]
        criterion: Success criterion bound to x
        cfg: Step sizes, iterations, bound, direction and similarity settings
        similarity: Objective to use instead of the one `cfg` names
        seed: Seed for the similarity objective (default `cfg.seed`)

    Returns:
        AttackResult with delta* (None on failure) and one trace row per iteration
    """
    start = time.perf_counter()
    x = np.asarray(x, dtype=np.float64)
    sign = direction_sign(cfg, criterion)
    similarity = resolve_similarity(x, criterion, cfg, similarity, seed)

    delta = np.zeros_like(x)
    c = 0.0
    best_value, best_mi, delta_star, best_f = -math.inf, None, None, None
    trace = []

    similarity.warmup(x, delta)
    state = evaluate_iterate(x, delta, criterion, similarity)

    for t in range(1, cfg.iterations + 1):
        grad_delta, _ = objective_gradients(state, c, sign)
        delta = project_box(delta - cfg.alpha * grad_delta, x, cfg.epsilon)

        similarity.refresh(x, delta)
        state = evaluate_iterate(x, delta, criterion, similarity)
        fplus, _ = hinge(state.f)
        c = c_update(c, t, cfg.beta, fplus, cfg.c_max)

        value = sign * state.s
        if state.f <= 0.0 and value > best_value:
            best_value, best_mi, delta_star, best_f = value, state.s, delta.copy(), state.f

        grad_delta_next, grad_c = objective_gradients(state, c, sign)
        stat = stationarity(delta, c, grad_delta_next, grad_c, cfg.epsilon, x, cfg.c_max)
        trace.append(TraceRow(t, state.f, c, state.s, stat, best_value))
        logger.debug(f"minmax t={t}: f={state.f:.6g} c={c:.6g} S={state.s:.6g} L2={stat:.6g}")

    success = delta_star is not None
    if success:
        ensure_feasible(x, delta_star, cfg.epsilon, best_f)
    elapsed = (time.perf_counter() - start) * 1000.0
    return AttackResult(
        delta_star=delta_star,
        best_value=best_value,
        best_mi=best_mi,
        success=success,
        trace=trace,
        iterations=cfg.iterations,
        wallclock_ms=elapsed,
        method="minmax",
        final_f=best_f if success else (state.f if trace else None),
    )
