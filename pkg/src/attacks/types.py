"""
Result containers for attacks.
"""
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

TRACE_HEADER = ("t", "f", "c", "mi", "stationarity_sq")


@dataclass
class TraceRow:
    """
    One iteration of an attack.

    `mi` is the raw similarity value (I_theta for MINE) at the new iterate;
    `best` is the best objective-direction value found so far (-inf until
    the first success).
    """

    t: int
    f: float
    c: float
    mi: float
    stationarity_sq: float
    best: float = -math.inf

    def as_row(self) -> tuple:
        return (self.t, self.f, self.c, self.mi, self.stationarity_sq)


@dataclass
class AttackResult:
    """
    Outcome of one attack.

    Attributes:
        delta_star: Best successful perturbation, None when no iterate succeeded
        best_value: Best objective-direction value (I for maximize, -I for minimize)
        best_mi: Raw similarity value at delta_star
        success: Whether any iterate met the criterion
        trace: One row per iteration
        iterations: Number of iterations run
        wallclock_ms: Elapsed time
        method: "minmax" or "penalty"
        sample_id: Index of the attacked sample, when run in a batch
        c_history: The fixed c of each search step (penalty only)
        final_f: Criterion value at delta_star (or at the last iterate on failure)
    """

    delta_star: Optional[np.ndarray]
    best_value: float
    best_mi: Optional[float]
    success: bool
    trace: List[TraceRow] = field(default_factory=list)
    iterations: int = 0
    wallclock_ms: float = 0.0
    method: str = "minmax"
    sample_id: Optional[int] = None
    c_history: List[float] = field(default_factory=list)
    final_f: Optional[float] = None

    def best_curve(self) -> np.ndarray:
        """Best objective-direction value after each iteration (NaN before the first success)."""
        values = np.array([row.best for row in self.trace], dtype=np.float64)
        values[~np.isfinite(values)] = np.nan
        return values
