"""
Batch driver: attack many samples, each with its own seed streams.

Sample i uses stream "attack:i" for its similarity objective (projection bank
and statistics network) and "mine:i" for MINE shuffles, so a sample's result
does not depend on which worker ran it or in what order. Results are merged
by sample id.
"""
import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from tqdm.auto import tqdm

from src.attacks.criteria import AttackCriterion
from src.attacks.minmax import minmax_attack
from src.attacks.penalty import penalty_attack
from src.attacks.similarity import make_similarity
from src.attacks.types import AttackResult
from src.core.config import AttackConfig
from src.models.network import ModelState
from src.utils.errors import ConfigurationError
from src.utils.seeding import attack_stream_name, derive_seed, mine_stream_name
from src.validation.validators import FeasibilityError, ensure_feasible

logger = logging.getLogger(__name__)


@dataclass
class AttackJob:
    """Everything a worker needs to attack one sample."""

    sample_id: int
    x: np.ndarray
    label: Optional[int]
    model: ModelState
    cfg: AttackConfig
    root_seed: int
    method: str = "minmax"
    search_steps: Optional[int] = None
    search_iterations: Optional[int] = None


def build_criterion(model: ModelState, x: np.ndarray, label: Optional[int], cfg: AttackConfig) -> AttackCriterion:
    """
    Pick the criterion matching the target model.

    Classifiers get the logit margin (targeted when `cfg.targeted`, aiming at
    `cfg.target_label` or label + 1 mod C); autoencoders get the
    reconstruction-loss criterion.
    """
    if model.spec.kind == "classifier":
        if label is None:
            raise ConfigurationError("Supervised attacks need labelled samples")
        if cfg.targeted:
            target = cfg.target_label if cfg.target_label is not None else (int(label) + 1) % model.spec.num_classes
            return AttackCriterion.targeted(model, target, cfg.kappa)
        return AttackCriterion.untargeted(model, int(label), cfg.kappa)
    if model.spec.kind == "mine-statistics":
        raise ConfigurationError("A statistics network cannot be attacked")
    return AttackCriterion.unsupervised(model, x, cfg.kappa)


def verify_result(x: np.ndarray, result: AttackResult, criterion: AttackCriterion, epsilon: float) -> bool:
    """Re-check a reported success from scratch; failures are always valid."""
    if not result.success:
        return True
    try:
        ensure_feasible(x, result.delta_star, epsilon, criterion.for_sample(x), sample_id=result.sample_id)
    except FeasibilityError as e:
        for error in e.errors:
            logger.error(f"sample {result.sample_id}: {error.type} at {error.loc}: {error.msg}")
        return False
    return True


def run_attack_job(job: AttackJob) -> AttackResult:
    """Attack one sample; top-level so process pools can pickle it."""
    x = np.asarray(job.x, dtype=np.float64)
    criterion = build_criterion(job.model, x, job.label, job.cfg)
    similarity = make_similarity(
        job.cfg,
        x.shape,
        derive_seed(job.root_seed, attack_stream_name(job.sample_id)),
        job.model,
        shuffle_seed=derive_seed(job.root_seed, mine_stream_name(job.sample_id)),
    )
    if job.method == "penalty":
        result = penalty_attack(x, criterion, job.cfg, job.search_steps, job.search_iterations, similarity=similarity)
    else:
        result = minmax_attack(x, criterion, job.cfg, similarity=similarity)
    result.sample_id = job.sample_id

    if not verify_result(x, result, criterion, job.cfg.epsilon):
        # never report a success that does not re-verify
        result.success, result.delta_star = False, None
    if not result.success:
        logger.warning(f"Attack on sample {job.sample_id} found no successful perturbation")
    return result


def run_attack_batch(
    samples: np.ndarray,
    labels: Optional[np.ndarray],
    model: ModelState,
    cfg: AttackConfig,
    root_seed: int,
    sample_ids: Optional[Sequence[int]] = None,
    workers: int = 1,
    method: Optional[str] = None,
    search_steps: Optional[int] = None,
    search_iterations: Optional[int] = None,
    progress: bool = True,
) -> List[AttackResult]:
    """
    Attack a batch of samples.

    Args:
        samples: Array of samples (N, ...)
        labels: Labels aligned with samples, needed for classifiers
        model: Target model
        cfg: Attack settings
        root_seed: Root seed of the run
        sample_ids: Which indices of `samples` to attack (default all)
        workers: Process count; 1 runs inline
        method: "minmax" or "penalty" (default `cfg.method`)
        search_steps: B for the penalty method
        search_iterations: T' for the penalty method
        progress: Show a progress bar

    Returns:
        Results ordered by sample id
    """
    ids = list(range(len(samples))) if sample_ids is None else [int(i) for i in sample_ids]
    method = method or cfg.method
    jobs = [
        AttackJob(
            sample_id=i,
            x=np.asarray(samples[i]),
            label=None if labels is None else int(labels[i]),
            model=model,
            cfg=cfg,
            root_seed=root_seed,
            method=method,
            search_steps=search_steps,
            search_iterations=search_iterations,
        )
        for i in ids
    ]
    logger.info(f"Running {method} attack on {len(jobs)} samples with {workers} worker(s)")

    results: List[AttackResult] = []
    if workers <= 1:
        for job in tqdm(jobs, desc=f"{method} attack", disable=not progress):
            results.append(run_attack_job(job))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_attack_job, job) for job in jobs]
            for future in tqdm(as_completed(futures), total=len(futures), desc=f"{method} attack", disable=not progress):
                results.append(future.result())

    results.sort(key=lambda r: r.sample_id)
    successes = sum(r.success for r in results)
    logger.info(f"{method} attack finished: {successes}/{len(results)} successful")
    return results


def attack_success_rate(results: Sequence[AttackResult]) -> float:
    return sum(r.success for r in results) / len(results) if results else 0.0


def mean_best_mi(results: Sequence[AttackResult]) -> float:
    """Mean raw similarity at delta* over successful results (NaN when none succeeded)."""
    values = [r.best_mi for r in results if r.success and r.best_mi is not None]
    return float(np.mean(values)) if values else float("nan")
