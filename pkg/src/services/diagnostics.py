"""
Diagnostic studies: MINE calibration, K ablation, the stationarity rate and
the fixed-budget penalty comparison.

These produce reports, not pass/fail verdicts; callers decide what to assert.
"""
import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from src.attacks.batch import attack_success_rate, mean_best_mi, run_attack_batch
from src.attacks.criteria import AttackCriterion
from src.attacks.minmax import minmax_attack
from src.attacks.similarity import MineSimilarity
from src.attacks.types import AttackResult
from src.core.config import AttackConfig, CalibrationConfig, MineConfig
from src.mine.calibration import CalibrationResult, estimate_mi
from src.mine.estimator import create_estimator, mine_update
from src.models.network import ModelState
from src.persistence.datasets import synth_gaussian_pairs
from src.tensor import Tensor
from src.tensor import functional as F
from src.utils import seeding

logger = logging.getLogger(__name__)

# K values of the ablation sweep
K_SWEEP = tuple(range(50, 801, 50))


# --- MINE calibration ---


class CalibrationSummary(BaseModel):
    rho: float
    dim: int
    analytic_mi: float
    median_estimate: float
    relative_error: float = Field(..., description="|median - analytic| / analytic")
    estimates: List[float]
    seeds: List[int]


def run_calibration(cfg: CalibrationConfig, root_seed: int, progress: bool = False) -> Tuple[CalibrationSummary, List[CalibrationResult]]:
    """Estimate the MI of seeded Gaussian pairs `cfg.repeats` times and report the median."""
    results = []
    for r in range(cfg.repeats):
        data_seed = seeding.derive_seed(root_seed, seeding.DATA_SUBSET, r)
        pairs = synth_gaussian_pairs(cfg.rho, cfg.dim, cfg.n, data_seed)
        results.append(estimate_mi(pairs, cfg, seeding.derive_seed(root_seed, "mine-calibrate", r), progress=progress))
    estimates = [r.estimate for r in results]
    median = float(np.median(estimates))
    analytic = results[0].analytic
    summary = CalibrationSummary(
        rho=cfg.rho,
        dim=cfg.dim,
        analytic_mi=analytic,
        median_estimate=median,
        relative_error=abs(median - analytic) / abs(analytic) if analytic else abs(median),
        estimates=estimates,
        seeds=[r.seed for r in results],
    )
    logger.info(f"Calibration: median estimate {median:.4f} vs analytic {analytic:.4f}")
    return summary, results


# --- K ablation ---


@dataclass
class KAblationRow:
    k: int
    mean_mi: float
    std_mi: float
    seconds: float


def k_ablation(
    x: np.ndarray,
    delta: np.ndarray,
    mine: MineConfig,
    ks: Sequence[int] = K_SWEEP,
    steps: int = 200,
    repeats: int = 3,
    seed: int = 0,
) -> List[KAblationRow]:
    """
    Per-sample MI estimate of (x, x + delta) as a function of the number of views K.

    The estimate is expected to settle once K is a few hundred; the rows
    report mean and spread over `repeats` seeds so the trend can be read off.
    """
    x = np.asarray(x, dtype=np.float64)
    xpd = np.clip(x + delta, 0.0, 1.0)
    rows = []
    for k in ks:
        cfg = mine.model_copy(update={"k": int(k), "scheme": "random"})
        start = time.perf_counter()
        values = []
        for r in range(repeats):
            est = create_estimator(x.shape, cfg, seeding.derive_seed(seed, "k-ablation", r))
            _, value = mine_update(est, x, xpd, steps)
            values.append(value)
        elapsed = (time.perf_counter() - start) / repeats
        rows.append(KAblationRow(int(k), float(np.mean(values)), float(np.std(values)), elapsed))
        logger.info(f"K={k}: MI {np.mean(values):.4f} +/- {np.std(values):.4f}")
    return rows


# --- Stationarity rate ---


@dataclass
class StationarityReport:
    """
    Prefix-minimum stationarity at a short and a long horizon, per seed.

    `monotone` must always hold; `median_ratio` is the quantity of interest
    (smaller means faster progress towards a stationary point).
    """

    short_horizon: int
    long_horizon: int
    prefix_min_short: List[float] = field(default_factory=list)
    prefix_min_long: List[float] = field(default_factory=list)

    @property
    def ratios(self) -> List[float]:
        return [lo / sh if sh > 0 else 0.0 for sh, lo in zip(self.prefix_min_short, self.prefix_min_long)]

    @property
    def median_ratio(self) -> float:
        return float(np.median(self.ratios)) if self.ratios else float("nan")

    @property
    def monotone(self) -> bool:
        return all(lo <= sh for sh, lo in zip(self.prefix_min_short, self.prefix_min_long))


def quadratic_criterion(target: np.ndarray, radius: float):
    """Smooth criterion f(x_adv) = ||x_adv - target||^2 - radius^2, success inside the ball."""
    target_t = Tensor(np.asarray(target, dtype=np.float64))

    def loss(x_adv: Tensor) -> Tensor:
        return F.sub(F.sum(F.square(F.sub(x_adv, target_t))), radius * radius)

    return loss


def prefix_min(values: Sequence[float]) -> np.ndarray:
    return np.minimum.accumulate(np.asarray(values, dtype=np.float64))


def stationarity_diagnostic(
    seeds: int = 20,
    short_horizon: int = 100,
    long_horizon: int = 400,
    shape: Tuple[int, ...] = (1, 6, 6),
    alpha: float = 0.01,
    beta: float = 0.1,
    root_seed: int = 0,
) -> StationarityReport:
    """
    MinMax with a frozen statistics network on a smooth synthetic criterion.

    The statistics network is never updated (zero ascent steps), so the
    similarity term is a fixed function of delta and the stationarity
    measure can only reflect progress of the delta/c iteration.
    """
    report = StationarityReport(short_horizon, long_horizon)
    mine = MineConfig(scheme="random", k=50, d_prime=8, hidden=[16, 16], inner_steps=0, warmup_steps=0)
    cfg = AttackConfig(alpha=alpha, beta=beta, iterations=long_horizon, epsilon=1.0, direction="maximize", mine=mine)
    for s in range(seeds):
        rng = seeding.stream(root_seed, "stationarity", s)
        x = rng.uniform(0.3, 0.7, size=shape)
        target = np.clip(x + rng.uniform(-0.2, 0.2, size=shape), 0.0, 1.0)
        criterion = AttackCriterion.custom(quadratic_criterion(target, radius=0.1))
        estimator = create_estimator(shape, mine, seeding.derive_seed(root_seed, seeding.attack_stream_name(s)))
        result = minmax_attack(x, criterion, cfg, similarity=MineSimilarity(estimator, warmup_steps=0))
        curve = prefix_min([row.stationarity_sq for row in result.trace])
        report.prefix_min_short.append(float(curve[short_horizon - 1]))
        report.prefix_min_long.append(float(curve[long_horizon - 1]))
    logger.info(f"Stationarity diagnostic: median ratio {report.median_ratio:.3f} over {seeds} seeds (monotone={report.monotone})")
    return report


# --- Fixed-budget penalty comparison ---


@dataclass
class ComparisonCohort:
    label: str
    method: str
    results: List[AttackResult]

    @property
    def asr(self) -> float:
        return attack_success_rate(self.results)

    @property
    def mean_best_mi(self) -> float:
        return mean_best_mi(self.results)


def compare_penalty(
    samples: np.ndarray,
    labels: Optional[np.ndarray],
    model: ModelState,
    cfg: AttackConfig,
    root_seed: int,
    splits: Sequence[Tuple[int, int]],
    sample_ids: Optional[Sequence[int]] = None,
    workers: int = 1,
    progress: bool = True,
) -> Dict[str, ComparisonCohort]:
    """
    Penalty attack with each (search steps a, iterations b) split next to MinMax with T = a * b.

    All splits must share the same total budget a * b.
    """
    budgets = {a * b for a, b in splits}
    if len(budgets) != 1:
        raise ValueError(f"All penalty splits must share one total budget, got {sorted(budgets)}")
    budget = budgets.pop()
    cohorts: Dict[str, ComparisonCohort] = {}
    minmax_cfg = cfg.model_copy(update={"iterations": budget})
    cohorts["minmax"] = ComparisonCohort(
        "minmax", "minmax", run_attack_batch(samples, labels, model, minmax_cfg, root_seed, sample_ids, workers, "minmax", progress=progress)
    )
    for a, b in splits:
        label = f"penalty-{a}x{b}"
        results = run_attack_batch(samples, labels, model, cfg, root_seed, sample_ids, workers, "penalty", a, b, progress=progress)
        cohorts[label] = ComparisonCohort(label, "penalty", results)
    for cohort in cohorts.values():
        logger.info(f"{cohort.label}: ASR {cohort.asr:.4f}, mean best MI {cohort.mean_best_mi:.4f}")
    return cohorts
