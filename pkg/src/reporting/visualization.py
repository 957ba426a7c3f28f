"""
MI-trace figures.

Plots mean and standard deviation of the best-so-far objective-direction
similarity per iteration, one band per attack cohort.
"""
import logging
from pathlib import Path
from typing import Dict, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from src.attacks.types import AttackResult  # noqa: E402

logger = logging.getLogger(__name__)


def best_curves(results: Sequence[AttackResult]) -> np.ndarray:
    """
    Best-so-far curves stacked to (samples, iterations).

    Shorter traces are padded with their last value; NaN marks iterations
    before a sample's first success.
    """
    length = max((len(r.trace) for r in results), default=0)
    curves = np.full((len(results), length), np.nan)
    for i, r in enumerate(results):
        curve = r.best_curve()
        if len(curve):
            curves[i, : len(curve)] = curve
            curves[i, len(curve) :] = curve[-1]
    return curves


def cohort_statistics(results: Sequence[AttackResult]):
    """(mean, std) per iteration over the samples that have succeeded by then."""
    curves = best_curves(results)
    if curves.size == 0:
        return np.zeros(0), np.zeros(0)
    counts = np.sum(np.isfinite(curves), axis=0)
    filled = np.where(np.isfinite(curves), curves, 0.0)
    safe = np.maximum(counts, 1)
    mean = np.sum(filled, axis=0) / safe
    var = np.sum(np.where(np.isfinite(curves), (curves - mean) ** 2, 0.0), axis=0) / safe
    mean[counts == 0] = np.nan
    return mean, np.sqrt(var)


def plot_mi_traces(cohorts: Dict[str, Sequence[AttackResult]], path: Union[str, Path], title: str = "Best MI over iterations") -> Path:
    """Write the MI-trace figure for the given cohorts and return its path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    plt.figure(figsize=(8, 5))
    for label, results in cohorts.items():
        mean, std = cohort_statistics(results)
        if mean.size == 0:
            continue
        t = np.arange(1, mean.size + 1)
        plt.plot(t, mean, label=label)
        plt.fill_between(t, mean - std, mean + std, alpha=0.2)
    plt.xlabel("iteration")
    plt.ylabel("best objective-direction MI")
    plt.title(title)
    plt.legend()
    plt.savefig(path, format=path.suffix.lstrip(".") or "png", bbox_inches="tight")
    plt.close()
    logger.info(f"MI trace figure written to {path}")
    return path
