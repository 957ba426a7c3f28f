"""
Penalty baseline: fixed-c projected gradient descent with a binary search over c.

Each search step runs T' iterations on c * f^+ - I~ with c held fixed; the
search then moves c between a lower and an upper bound depending on whether
any successful perturbation has been found so far.
"""
import logging
import math
import time
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from src.attacks.criteria import AttackCriterion
from src.attacks.minmax import direction_sign, evaluate_iterate, objective_gradients, resolve_similarity
from src.attacks.projections import project_box, stationarity
from src.attacks.similarity import SimilarityObjective
from src.attacks.types import AttackResult, TraceRow
from src.core.config import AttackConfig
from src.validation.validators import ensure_feasible

logger = logging.getLogger(__name__)

C_LOWER = 1e-3
C_UPPER = 1e9
C_INITIAL = 1e-3


@dataclass
class SearchBounds:
    """Bracket on the penalty coefficient; `ub` stays pinned at C_UPPER until a success."""

    lb: float = C_LOWER
    ub: float = C_UPPER
    c: float = C_INITIAL

    def advance(self, succeeded: bool) -> float:
        """Apply one binary-search update and return the next c."""
        if succeeded:
            self.ub = min(self.ub, self.c)
            if self.ub < C_UPPER:
                self.c = (self.lb + self.ub) / 2
        else:
            self.lb = max(self.lb, self.c)
            if self.ub < C_UPPER:
                self.c = (self.lb + self.ub) / 2
            else:
                self.c *= 10
        return self.c


def c_schedule(outcomes: List[bool]) -> List[float]:
    """The c used at each search step for a given sequence of step outcomes."""
    bounds = SearchBounds()
    schedule = []
    for succeeded in outcomes:
        schedule.append(bounds.c)
        bounds.advance(succeeded)
    return schedule


def penalty_attack(
    x: np.ndarray,
    criterion: AttackCriterion,
    cfg: AttackConfig,
    search_steps: Optional[int] = None,
    search_iterations: Optional[int] = None,
    similarity: Optional[SimilarityObjective] = None,
    seed: Optional[int] = None,
) -> AttackResult:
    """
    Run the penalty attack with binary search over c.

    delta restarts from zero at every search step while the similarity
    objective (the MINE network) stays warm. Best-tracking runs over all
    B * T' iterates exactly as in the MinMax attack.

    Args:
        x: Sample with values in [0, 1]
        criterion: Success criterion bound to x
        cfg: Attack settings; alpha, epsilon, direction and similarity are shared with MinMax
        search_steps: B (default `cfg.search_steps`)
        search_iterations: T' (default `cfg.search_iterations`)
        similarity: Objective to use instead of the one `cfg` names
        seed: Seed for the similarity objective (default `cfg.seed`)
    """
    steps = cfg.search_steps if search_steps is None else search_steps
    inner = cfg.search_iterations if search_iterations is None else search_iterations
    if steps < 1 or inner < 1:
        raise ValueError(f"penalty_attack needs B >= 1 and T' >= 1, got B={steps}, T'={inner}")

    start = time.perf_counter()
    x = np.asarray(x, dtype=np.float64)
    sign = direction_sign(cfg, criterion)
    similarity = resolve_similarity(x, criterion, cfg, similarity, seed)

    bounds = SearchBounds()
    best_value, best_mi, delta_star, best_f = -math.inf, None, None, None
    trace, c_history = [], []
    last_f = None
    t = 0

    similarity.warmup(x, np.zeros_like(x))
    for b in range(steps):
        c = bounds.c
        c_history.append(c)
        delta = np.zeros_like(x)
        state = evaluate_iterate(x, delta, criterion, similarity)

        for _ in range(inner):
            t += 1
            grad_delta, _ = objective_gradients(state, c, sign)
            delta = project_box(delta - cfg.alpha * grad_delta, x, cfg.epsilon)

            similarity.refresh(x, delta)
            state = evaluate_iterate(x, delta, criterion, similarity)
            last_f = state.f

            value = sign * state.s
            if state.f <= 0.0 and value > best_value:
                best_value, best_mi, delta_star, best_f = value, state.s, delta.copy(), state.f

            grad_delta_next, grad_c = objective_gradients(state, c, sign)
            stat = stationarity(delta, c, grad_delta_next, grad_c, cfg.epsilon, x, cfg.c_max)
            trace.append(TraceRow(t, state.f, c, state.s, stat, best_value))

        succeeded = delta_star is not None and criterion.value_at(x, delta_star) <= 0.0
        logger.debug(f"penalty search step {b + 1}/{steps}: c={c:.6g} success={succeeded}")
        bounds.advance(succeeded)

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
        iterations=t,
        wallclock_ms=elapsed,
        method="penalty",
        c_history=c_history,
        final_f=best_f if success else last_f,
    )
